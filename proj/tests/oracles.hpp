#pragma once

// Independent reference computations. Everything here is written from the
// feature definitions directly, with plain loops and no library helpers, so a
// match against the library is evidence rather than a tautology.

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "netsentry/netsentry.hpp"
#include "support.hpp"

namespace oracle {

using namespace netsentry;

// ---- flow statistics -------------------------------------------------------------

struct Stats4 {
  double mn = 0, mx = 0, mean = 0, sd = 0;
};

// Welford; zeros below two samples.
inline Stats4 describe(const std::vector<double> &xs) {
  Stats4 s;
  if (xs.size() < 2) return s;
  s.mn = xs[0];
  s.mx = xs[0];
  double mean = 0, m2 = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < s.mn) s.mn = xs[i];
    if (xs[i] > s.mx) s.mx = xs[i];
    const double d = xs[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (xs[i] - mean);
  }
  s.mean = mean;
  s.sd = std::sqrt(m2 / static_cast<double>(xs.size() - 1));
  return s;
}

// All 63 statistics of one flow given its packets in arrival order.
inline std::array<double, 63> flow_stats(const std::vector<PacketRecord> &pk, double activity_s = 5.0,
                                         double subflow_s = 5.0) {
  std::array<double, 63> o{};
  const auto &first = pk.front();
  auto forward = [&](const PacketRecord &p) { return p.src_ip == first.src_ip && p.src_port == first.src_port; };

  std::vector<double> fwd_t, bwd_t, fwd_len, bwd_len, all_len;
  double fwd_bytes = 0, bwd_bytes = 0, fwd_hdr = 0, bwd_hdr = 0, fwd_psh = 0, bwd_psh = 0, fwd_urg = 0, bwd_urg = 0;
  double fwd_win = -1, bwd_win = -1;
  std::array<double, 8> flag{};
  for (const auto &p : pk) {
    const double t = static_cast<double>(p.timestamp_us) / 1e6;
    all_len.push_back(p.payload_len_bytes);
    if (forward(p)) {
      fwd_t.push_back(t);
      fwd_len.push_back(p.payload_len_bytes);
      fwd_bytes += p.payload_len_bytes;
      fwd_hdr += p.header_len_bytes;
      fwd_psh += (p.tcp_flags & 0x08) ? 1 : 0;
      fwd_urg += (p.tcp_flags & 0x20) ? 1 : 0;
      if (fwd_win < 0) fwd_win = p.protocol == Protocol::TCP ? p.tcp_window : 0;
    } else {
      bwd_t.push_back(t);
      bwd_len.push_back(p.payload_len_bytes);
      bwd_bytes += p.payload_len_bytes;
      bwd_hdr += p.header_len_bytes;
      bwd_psh += (p.tcp_flags & 0x08) ? 1 : 0;
      bwd_urg += (p.tcp_flags & 0x20) ? 1 : 0;
      if (bwd_win < 0) bwd_win = p.protocol == Protocol::TCP ? p.tcp_window : 0;
    }
    // columns: FIN SYN RST PSH ACK URG CWE ECE; wire: ... 0x40 ECE, 0x80 CWR
    const int col_of_bit[8] = {0, 1, 2, 3, 4, 5, 7, 6};
    for (int b = 0; b < 8; ++b)
      if (p.tcp_flags & (1 << b)) flag[col_of_bit[b]] += 1;
  }
  // gaps taken in integer microseconds, then scaled, to avoid differencing
  // large absolute times in floating point
  auto gaps_us = [&](auto pick) {
    std::vector<double> g;
    const PacketRecord *prev = nullptr;
    for (const auto &p : pk) {
      if (!pick(forward(p))) continue;
      if (prev) g.push_back(static_cast<double>(p.timestamp_us - prev->timestamp_us) * 1e-6);
      prev = &p;
    }
    return g;
  };
  const auto fwd_iat = gaps_us([](bool f) { return f; });
  const auto bwd_iat = gaps_us([](bool f) { return !f; });
  const auto all_iat = gaps_us([](bool) { return true; });

  const double duration = static_cast<double>(pk.back().timestamp_us - pk.front().timestamp_us) * 1e-6;
  auto rate = [&](double n) { return duration > 0 ? n / duration : 0.0; };
  auto put = [&](int at, const Stats4 &s) {
    o[at] = s.mn;
    o[at + 1] = s.mx;
    o[at + 2] = s.mean;
    o[at + 3] = s.sd;
  };

  put(0, describe(fwd_iat));
  o[4] = rate(static_cast<double>(fwd_t.size()));
  put(5, describe(bwd_iat));
  o[9] = rate(static_cast<double>(bwd_t.size()));
  o[10] = duration;
  put(11, describe(all_iat));
  o[15] = rate(static_cast<double>(pk.size()));
  o[16] = rate(fwd_bytes + bwd_bytes);

  // active / idle: a gap above the threshold closes the current active period
  std::vector<double> active, idle;
  std::int64_t active_start = pk.front().timestamp_us;
  std::size_t subflows = 1;
  for (std::size_t i = 1; i < pk.size(); ++i) {
    const std::int64_t gap = pk[i].timestamp_us - pk[i - 1].timestamp_us;
    if (static_cast<double>(gap) > activity_s * 1e6) {
      active.push_back(static_cast<double>(pk[i - 1].timestamp_us - active_start) * 1e-6);
      idle.push_back(static_cast<double>(gap) * 1e-6);
      active_start = pk[i].timestamp_us;
    }
    if (static_cast<double>(gap) > subflow_s * 1e6) ++subflows;
  }
  active.push_back(static_cast<double>(pk.back().timestamp_us - active_start) * 1e-6);
  put(17, describe(active));
  put(21, describe(idle));

  auto block = [&](int base, const std::vector<double> &len, double bytes, double hdr, double psh, double urg,
                   double win) {
    const double n = static_cast<double>(len.size());
    o[base] = n;
    put(base + 1, describe(len));
    o[base + 5] = psh;
    o[base + 6] = urg;
    o[base + 7] = hdr;
    o[base + 8] = win < 0 ? 0 : win;
    o[base + 9] = n > 0 ? bytes / n : 0;
    o[base + 10] = n / static_cast<double>(subflows);
    o[base + 11] = bytes / static_cast<double>(subflows);
  };
  block(25, fwd_len, fwd_bytes, fwd_hdr, fwd_psh, fwd_urg, fwd_win);
  block(37, bwd_len, bwd_bytes, bwd_hdr, bwd_psh, bwd_urg, bwd_win);
  put(49, describe(all_len));
  for (int b = 0; b < 8; ++b) o[53 + b] = flag[b];
  o[61] = fwd_bytes > 0 ? bwd_bytes / fwd_bytes : 0;
  o[62] = first.protocol == Protocol::TCP ? 6 : first.protocol == Protocol::UDP ? 17 : 0;
  return o;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b)) + abs_floor;
}

// Random single-flow trace: 2..200 packets, both directions, gaps mostly
// sub-second with occasional multi-second pauses, total under the flow
// timeout. No FIN or RST, so the flow ends at end of stream.
inline std::vector<PacketRecord> random_flow(std::mt19937_64 &rng, bool tcp_flow) {
  std::uniform_int_distribution<int> count(2, 200);
  const int n = count(rng);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<PacketRecord> out;
  std::int64_t t = 1'000'000 + static_cast<std::int64_t>(u(rng) * 1e6);
  const std::int64_t budget = 28'000'000;
  const std::int64_t t0 = t;
  for (int i = 0; i < n; ++i) {
    const bool fwd = i == 0 || u(rng) < 0.55;
    PacketRecord p;
    p.timestamp_us = t;
    p.src_ip = IpAddress::parse(fwd ? "10.1.0.1" : "10.1.0.2");
    p.dst_ip = IpAddress::parse(fwd ? "10.1.0.2" : "10.1.0.1");
    p.src_port = fwd ? 51000 : 443;
    p.dst_port = fwd ? 443 : 51000;
    p.protocol = tcp_flow ? Protocol::TCP : Protocol::UDP;
    p.payload_len_bytes = u(rng) < 0.2 ? 0 : static_cast<std::uint32_t>(u(rng) * 1460);
    p.header_len_bytes = tcp_flow ? 40 + 4 * static_cast<std::uint32_t>(u(rng) * 4) : 28;
    if (tcp_flow) {
      std::uint8_t f = 0;
      for (std::uint8_t b : {tcp::SYN, tcp::PSH, tcp::ACK, tcp::URG, tcp::ECE, tcp::CWE})
        if (u(rng) < 0.3) f |= b;
      p.tcp_flags = f;
      p.tcp_window = static_cast<std::uint32_t>(u(rng) * 65535);
    }
    out.push_back(p);
    const double r = u(rng);
    std::int64_t gap = r < 0.05 ? 5'000'000 + static_cast<std::int64_t>(u(rng) * 3e6)
                                : static_cast<std::int64_t>(u(rng) * u(rng) * 400'000);
    if (t + gap - t0 > budget) gap = std::max<std::int64_t>(0, std::min<std::int64_t>(gap, 1000));
    t += gap;
  }
  testing_support::renumber(out);
  return out;
}

// ---- port-reuse fixture ---------------------------------------------------------------

// Two back-to-back HTTP exchanges from attacker port 8888, each closed with a
// full four-way teardown, the second reusing the 5-tuple right after the
// first close. `server_closes_first` flips who sends the first FIN.
inline std::vector<PacketRecord> port_reuse_trace(bool server_closes_first = false) {
  using testing_support::tcp_pkt;
  const std::string A = "172.16.0.1", V = "192.168.10.50";
  std::vector<PacketRecord> v;
  std::int64_t t = 1'000'000;
  for (int cycle = 0; cycle < 2; ++cycle) {
    auto a = [&](std::uint8_t f, std::uint32_t len = 0) { v.push_back(tcp_pkt(t += 200, A, 8888, V, 80, f, len, 29200)); };
    auto b = [&](std::uint8_t f, std::uint32_t len = 0) { v.push_back(tcp_pkt(t += 200, V, 80, A, 8888, f, len, 28960)); };
    a(tcp::SYN);
    b(tcp::SYN | tcp::ACK);
    a(tcp::ACK);
    a(tcp::PSH | tcp::ACK, 320);
    b(tcp::ACK);
    b(tcp::PSH | tcp::ACK, 1200);
    a(tcp::ACK);
    if (!server_closes_first) {
      a(tcp::FIN | tcp::ACK);
      b(tcp::ACK);
      b(tcp::FIN | tcp::ACK);
      a(tcp::ACK);
    } else {
      b(tcp::FIN | tcp::ACK);
      a(tcp::ACK);
      a(tcp::FIN | tcp::ACK);
      b(tcp::ACK);
    }
    t += 500;
  }
  testing_support::renumber(v);
  return v;
}

// ---- recurrent cells ------------------------------------------------------------------

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM step with plain loops: W* are h x d / h x h row-major.
inline void lstm_ref(const nn::LSTMCellParams &p, const std::vector<double> &x, std::vector<double> &h,
                     std::vector<double> &c) {
  const std::size_t H = p.h, D = p.d;
  std::vector<double> hn(H), cn(H);
  for (std::size_t r = 0; r < H; ++r) {
    double zi = p.b_i.value[r], zf = p.b_f.value[r], zc = p.b_c.value[r], zo = p.b_o.value[r];
    for (std::size_t j = 0; j < D; ++j) {
      zi += p.W_xi.value[r * D + j] * x[j];
      zf += p.W_xf.value[r * D + j] * x[j];
      zc += p.W_xc.value[r * D + j] * x[j];
      zo += p.W_xo.value[r * D + j] * x[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      zi += p.W_hi.value[r * H + j] * h[j];
      zf += p.W_hf.value[r * H + j] * h[j];
      zc += p.W_hc.value[r * H + j] * h[j];
      zo += p.W_ho.value[r * H + j] * h[j];
    }
    cn[r] = sigm(zf) * c[r] + sigm(zi) * std::tanh(zc);
    hn[r] = sigm(zo) * std::tanh(cn[r]);
  }
  h = hn;
  c = cn;
}

// Zero-padded "same" cross-correlation of a (cin x L) signal.
inline std::vector<double> conv_ref(const std::vector<double> &x, const std::vector<double> &K, std::size_t cout,
                                    std::size_t cin, std::size_t k, std::size_t L) {
  std::vector<double> y(cout * L, 0.0);
  const long half = static_cast<long>(k / 2);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t pos = 0; pos < L; ++pos) {
      double s = 0;
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(pos) + static_cast<long>(j) - half;
          if (src < 0 || src >= static_cast<long>(L)) continue;
          s += K[(o * cin + i) * k + j] * x[i * L + static_cast<std::size_t>(src)];
        }
      y[o * L + pos] = s;
    }
  return y;
}

inline void convlstm_ref(const nn::ConvLSTMCellParams &p, const std::vector<double> &X, std::size_t L,
                         std::vector<double> &H, std::vector<double> &C) {
  auto gate = [&](const nn::Param &Kx, const nn::Param &Kh, const nn::Param &b) {
    auto zx = conv_ref(X, Kx.value, p.cout, p.cin, p.k, L);
    auto zh = conv_ref(H, Kh.value, p.cout, p.cout, p.k, L);
    for (std::size_t o = 0; o < p.cout; ++o)
      for (std::size_t pos = 0; pos < L; ++pos) zx[o * L + pos] += zh[o * L + pos] + b.value[o];
    return zx;
  };
  const auto zi = gate(p.K_xi, p.K_hi, p.b_i), zf = gate(p.K_xf, p.K_hf, p.b_f), zc = gate(p.K_xc, p.K_hc, p.b_c),
             zo = gate(p.K_xo, p.K_ho, p.b_o);
  std::vector<double> Hn(H.size()), Cn(C.size());
  for (std::size_t i = 0; i < Cn.size(); ++i) {
    Cn[i] = sigm(zf[i]) * C[i] + sigm(zi[i]) * std::tanh(zc[i]);
    Hn[i] = sigm(zo[i]) * std::tanh(Cn[i]);
  }
  H = Hn;
  C = Cn;
}

inline void fill_random(nn::Param &p, std::mt19937_64 &rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double &v : p.value) v = u(rng);
}

// ---- metrics --------------------------------------------------------------------------

// AUC as the probability that a random positive outscores a random negative
// (ties count one half), by enumerating every pair.
inline double pairwise_auc(const std::vector<double> &s, const std::vector<bool> &y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] && !y[j]) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / den;
}

} // namespace oracle
