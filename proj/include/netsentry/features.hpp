#pragma once

// Per-flow statistics: 6 identifier fields + 63 numeric features + label.
//
// Column order (fixed; the CSV and the model input follow it):
//   timing   [0, 25)  fwd IAT x4, fwd pkts/s, bwd IAT x4, bwd pkts/s,
//                     duration, flow IAT x4, flow pkts/s, flow bytes/s,
//                     active x4, idle x4
//   protocol [25, 63) fwd {#pkts, pkt-len x4, PSH, URG, header len, init
//                     window, avg segment, subflow avg pkts, subflow avg
//                     bytes}, the same 12 backward, then bidirectional
//                     pkt-len x4, 8 flag counts, down/up ratio, protocol
// Every "x4" group is (min, max, avg, std). Times are seconds, sizes are
// payload bytes.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "netsentry/error.hpp"
#include "netsentry/flow.hpp"
#include "netsentry/packet.hpp"
#include "netsentry/text.hpp"

namespace netsentry {

inline constexpr std::size_t kStatFeatures = 63;
inline constexpr std::size_t kIdFeatures = 6;
// 62 numeric stats + one-hot {TCP, UDP, OTHER} in place of the protocol code
inline constexpr std::size_t kModelFeatures = 65;

namespace feat {
// fwd timing
inline constexpr std::size_t FwdIat = 0; // +0 min, +1 max, +2 avg, +3 std
inline constexpr std::size_t FwdPktsPerSec = 4;
inline constexpr std::size_t BwdIat = 5;
inline constexpr std::size_t BwdPktsPerSec = 9;
inline constexpr std::size_t Duration = 10;
inline constexpr std::size_t FlowIat = 11;
inline constexpr std::size_t FlowPktsPerSec = 15;
inline constexpr std::size_t FlowBytesPerSec = 16;
inline constexpr std::size_t Active = 17;
inline constexpr std::size_t Idle = 21;
// directional protocol block: base + offset
inline constexpr std::size_t FwdBlock = 25;
inline constexpr std::size_t BwdBlock = 37;
inline constexpr std::size_t Packets = 0;
inline constexpr std::size_t PktLen = 1;
inline constexpr std::size_t Psh = 5;
inline constexpr std::size_t Urg = 6;
inline constexpr std::size_t HeaderLen = 7;
inline constexpr std::size_t InitWindow = 8;
inline constexpr std::size_t AvgSegment = 9;
inline constexpr std::size_t SubflowPkts = 10;
inline constexpr std::size_t SubflowBytes = 11;
// bidirectional protocol
inline constexpr std::size_t PktLenAll = 49;
inline constexpr std::size_t Flags = 53; // FIN SYN RST PSH ACK URG CWE ECE
inline constexpr std::size_t DownUpRatio = 61;
inline constexpr std::size_t ProtocolCode = 62;
} // namespace feat

inline const std::array<std::string, kStatFeatures> &stat_feature_names() {
  static const std::array<std::string, kStatFeatures> names = [] {
    std::array<std::string, kStatFeatures> n;
    const char *q[4] = {"min", "max", "avg", "std"};
    auto quad = [&](std::size_t at, const std::string &stem) {
      for (int i = 0; i < 4; ++i) n[at + i] = stem + "_" + q[i];
    };
    quad(feat::FwdIat, "fwd_iat");
    n[feat::FwdPktsPerSec] = "fwd_pkts_per_s";
    quad(feat::BwdIat, "bwd_iat");
    n[feat::BwdPktsPerSec] = "bwd_pkts_per_s";
    n[feat::Duration] = "duration";
    quad(feat::FlowIat, "flow_iat");
    n[feat::FlowPktsPerSec] = "flow_pkts_per_s";
    n[feat::FlowBytesPerSec] = "flow_bytes_per_s";
    quad(feat::Active, "active");
    quad(feat::Idle, "idle");
    for (auto [base, dir] : {std::pair{feat::FwdBlock, "fwd"}, std::pair{feat::BwdBlock, "bwd"}}) {
      const std::string d = dir;
      n[base + feat::Packets] = d + "_pkts";
      quad(base + feat::PktLen, d + "_pkt_len");
      n[base + feat::Psh] = d + "_psh";
      n[base + feat::Urg] = d + "_urg";
      n[base + feat::HeaderLen] = d + "_header_len";
      n[base + feat::InitWindow] = d + "_init_win";
      n[base + feat::AvgSegment] = d + "_avg_segment";
      n[base + feat::SubflowPkts] = d + "_subflow_avg_pkts";
      n[base + feat::SubflowBytes] = d + "_subflow_avg_bytes";
    }
    quad(feat::PktLenAll, "pkt_len");
    const char *flags[8] = {"fin", "syn", "rst", "psh", "ack", "urg", "cwe", "ece"};
    for (int i = 0; i < 8; ++i) n[feat::Flags + i] = std::string(flags[i]) + "_count";
    n[feat::DownUpRatio] = "down_up_ratio";
    n[feat::ProtocolCode] = "protocol";
    return n;
  }();
  return names;
}

// The payload-derived subset replaced during augmentation.
inline const std::array<std::size_t, 18> &payload_feature_indices() {
  static const std::array<std::size_t, 18> idx = {
      feat::FwdBlock + feat::PktLen,     feat::FwdBlock + feat::PktLen + 1, feat::FwdBlock + feat::PktLen + 2,
      feat::FwdBlock + feat::PktLen + 3, feat::BwdBlock + feat::PktLen,     feat::BwdBlock + feat::PktLen + 1,
      feat::BwdBlock + feat::PktLen + 2, feat::BwdBlock + feat::PktLen + 3, feat::PktLenAll,
      feat::PktLenAll + 1,               feat::PktLenAll + 2,               feat::PktLenAll + 3,
      feat::FlowBytesPerSec,             feat::FwdBlock + feat::AvgSegment, feat::BwdBlock + feat::AvgSegment,
      feat::FwdBlock + feat::SubflowBytes, feat::BwdBlock + feat::SubflowBytes, feat::DownUpRatio};
  return idx;
}

struct FeatureVector {
  std::string flow_id;
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::int64_t start_us = 0;
  std::array<double, kStatFeatures> stats{};
  std::string label = "benign";

  Protocol protocol() const { return protocol_from_number(static_cast<unsigned>(stats[feat::ProtocolCode])); }
  std::int64_t end_us() const { return start_us + static_cast<std::int64_t>(std::llround(stats[feat::Duration] * 1e6)); }

  // 65-wide model input: stats minus the protocol code, plus its one-hot.
  std::array<double, kModelFeatures> model_input() const {
    std::array<double, kModelFeatures> x{};
    std::copy(stats.begin(), stats.begin() + feat::ProtocolCode, x.begin());
    const Protocol p = protocol();
    x[62 + static_cast<std::size_t>(p)] = 1.0;
    return x;
  }

  bool operator==(const FeatureVector &) const = default;
};

struct Quad {
  double min = 0, max = 0, avg = 0, std = 0;
};

// (min, max, mean, sample std); all zero below two samples.
inline Quad quad_stats(std::span<const double> xs) {
  Quad q;
  if (xs.size() < 2) return q;
  q.min = *std::min_element(xs.begin(), xs.end());
  q.max = *std::max_element(xs.begin(), xs.end());
  double sum = 0;
  for (double v : xs) sum += v;
  q.avg = sum / static_cast<double>(xs.size());
  double ss = 0;
  for (double v : xs) ss += (v - q.avg) * (v - q.avg);
  q.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  // keep min <= avg <= max under rounding
  q.avg = std::clamp(q.avg, q.min, q.max);
  return q;
}

inline std::string make_flow_id(const FlowKey &k, std::int64_t start_us) {
  return k.src_ip.to_string() + "-" + k.dst_ip.to_string() + "-" + std::to_string(k.src_port) + "-" +
         std::to_string(k.dst_port) + "-" + std::to_string(protocol_number(k.protocol)) + "-" +
         std::to_string(start_us);
}

namespace detail {

inline void put_quad(std::array<double, kStatFeatures> &s, std::size_t at, const Quad &q) {
  s[at] = q.min;
  s[at + 1] = q.max;
  s[at + 2] = q.avg;
  s[at + 3] = q.std;
}

inline std::vector<double> iats_seconds(const std::vector<PacketRecord> &pkts) {
  std::vector<double> out;
  for (std::size_t i = 1; i < pkts.size(); ++i)
    out.push_back(static_cast<double>(pkts[i].timestamp_us - pkts[i - 1].timestamp_us) * 1e-6);
  return out;
}

inline void directional_block(std::array<double, kStatFeatures> &s, std::size_t base,
                              const std::vector<PacketRecord> &pkts, std::size_t subflows) {
  std::vector<double> lens;
  double bytes = 0, header = 0, psh = 0, urg = 0;
  for (const auto &p : pkts) {
    lens.push_back(p.payload_len_bytes);
    bytes += p.payload_len_bytes;
    header += p.header_len_bytes;
    psh += p.has(tcp::PSH);
    urg += p.has(tcp::URG);
  }
  const double n = static_cast<double>(pkts.size());
  s[base + feat::Packets] = n;
  put_quad(s, base + feat::PktLen, quad_stats(lens));
  s[base + feat::Psh] = psh;
  s[base + feat::Urg] = urg;
  s[base + feat::HeaderLen] = header;
  s[base + feat::InitWindow] = pkts.empty() || pkts.front().protocol != Protocol::TCP ? 0.0 : pkts.front().tcp_window;
  s[base + feat::AvgSegment] = pkts.empty() ? 0.0 : bytes / n;
  s[base + feat::SubflowPkts] = n / static_cast<double>(subflows);
  s[base + feat::SubflowBytes] = bytes / static_cast<double>(subflows);
}

} // namespace detail

// Computes the full feature vector of a completed flow. Pure: depends only
// on `flow`.
inline FeatureVector extract_features(const FlowState &flow) {
  require(flow.complete(), "extract_features: flow is not complete");
  require(!flow.arrival.empty(), "extract_features: empty flow");

  FeatureVector fv;
  fv.src_ip = flow.key.src_ip;
  fv.dst_ip = flow.key.dst_ip;
  fv.src_port = flow.key.src_port;
  fv.dst_port = flow.key.dst_port;
  fv.start_us = flow.start_us;
  fv.flow_id = make_flow_id(flow.key, flow.start_us);
  auto &s = fv.stats;

  const auto all = flow.packets();
  const double duration = static_cast<double>(flow.last_seen_us - flow.start_us) * 1e-6;
  const auto per_sec = [&](double count) { return duration > 0 ? count / duration : 0.0; };

  detail::put_quad(s, feat::FwdIat, quad_stats(detail::iats_seconds(flow.fwd_packets)));
  s[feat::FwdPktsPerSec] = per_sec(static_cast<double>(flow.fwd_packets.size()));
  detail::put_quad(s, feat::BwdIat, quad_stats(detail::iats_seconds(flow.bwd_packets)));
  s[feat::BwdPktsPerSec] = per_sec(static_cast<double>(flow.bwd_packets.size()));
  s[feat::Duration] = duration;
  detail::put_quad(s, feat::FlowIat, quad_stats(detail::iats_seconds(all)));
  s[feat::FlowPktsPerSec] = per_sec(static_cast<double>(all.size()));

  double fwd_bytes = 0, bwd_bytes = 0;
  for (const auto &p : flow.fwd_packets) fwd_bytes += p.payload_len_bytes;
  for (const auto &p : flow.bwd_packets) bwd_bytes += p.payload_len_bytes;
  s[feat::FlowBytesPerSec] = per_sec(fwd_bytes + bwd_bytes);

  auto to_sec = [](const std::vector<std::int64_t> &v) {
    std::vector<double> out;
    for (auto x : v) out.push_back(static_cast<double>(x) * 1e-6);
    return out;
  };
  detail::put_quad(s, feat::Active, quad_stats(to_sec(flow.active_periods)));
  detail::put_quad(s, feat::Idle, quad_stats(to_sec(flow.idle_periods)));

  const std::size_t subflows = std::max<std::size_t>(1, flow.subflow_starts.size());
  detail::directional_block(s, feat::FwdBlock, flow.fwd_packets, subflows);
  detail::directional_block(s, feat::BwdBlock, flow.bwd_packets, subflows);

  std::vector<double> lens;
  for (const auto &p : all) {
    lens.push_back(p.payload_len_bytes);
    for (int b = 0; b < 8; ++b) s[feat::Flags + b] += (p.tcp_flags >> b) & 1;
  }
  // wire bit order is FIN SYN RST PSH ACK URG ECE CWR; columns list CWE before ECE
  std::swap(s[feat::Flags + 6], s[feat::Flags + 7]);
  detail::put_quad(s, feat::PktLenAll, quad_stats(lens));
  s[feat::DownUpRatio] = fwd_bytes > 0 ? bwd_bytes / fwd_bytes : 0.0;
  s[feat::ProtocolCode] = protocol_number(flow.key.protocol);
  return fv;
}

// ---- flow CSV -------------------------------------------------------------

inline std::string flow_csv_header() {
  std::string h = "flow_id,src_ip,dst_ip,src_port,dst_port,start_timestamp_us";
  for (const auto &n : stat_feature_names()) h += "," + n;
  h += ",label";
  return h;
}

inline void write_flow_csv(std::ostream &out, std::span<const FeatureVector> flows) {
  out << flow_csv_header() << '\n';
  for (const auto &f : flows) {
    out << f.flow_id << ',' << f.src_ip.to_string() << ',' << f.dst_ip.to_string() << ',' << f.src_port << ','
        << f.dst_port << ',' << f.start_us;
    for (double v : f.stats) out << ',' << text::format_double(v);
    out << ',' << f.label << '\n';
  }
}

inline void write_flow_csv(const std::string &path, std::span<const FeatureVector> flows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write flow CSV: " + path);
  write_flow_csv(out, flows);
}

inline std::vector<FeatureVector> read_flow_csv(std::istream &in) {
  std::vector<FeatureVector> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (std::string(text::trim(line)) != flow_csv_header()) throw FormatError("flow CSV: unexpected header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != kIdFeatures + kStatFeatures + 1)
      throw FormatError("flow CSV line " + std::to_string(lineno) + ": expected 70 fields");
    FeatureVector fv;
    fv.flow_id = f[0];
    fv.src_ip = IpAddress::parse(f[1]);
    fv.dst_ip = IpAddress::parse(f[2]);
    fv.src_port = static_cast<std::uint16_t>(text::to_int(f[3]));
    fv.dst_port = static_cast<std::uint16_t>(text::to_int(f[4]));
    fv.start_us = text::to_int(f[5]);
    for (std::size_t i = 0; i < kStatFeatures; ++i) fv.stats[i] = text::to_double(f[kIdFeatures + i]);
    fv.label = f.back();
    out.push_back(std::move(fv));
  }
  return out;
}

inline std::vector<FeatureVector> read_flow_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open flow CSV: " + path);
  return read_flow_csv(in);
}

// Markdown table describing every CSV column.
inline std::string feature_dictionary() {
  std::string out = "| column | name | group |\n|---|---|---|\n";
  const char *ids[kIdFeatures] = {"flow_id", "src_ip", "dst_ip", "src_port", "dst_port", "start_timestamp_us"};
  std::size_t col = 0;
  for (auto id : ids) out += "| " + std::to_string(col++) + " | " + id + " | id |\n";
  const auto &names = stat_feature_names();
  for (std::size_t i = 0; i < kStatFeatures; ++i)
    out += "| " + std::to_string(col++) + " | " + names[i] + " | " + (i < feat::FwdBlock ? "timing" : "protocol") +
           " |\n";
  out += "| " + std::to_string(col) + " | label | label |\n";
  return out;
}

} // namespace netsentry
