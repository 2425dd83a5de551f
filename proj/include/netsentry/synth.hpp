#pragma once

// Deterministic desk-scale traffic generator: benign request/response mixes
// plus HTTP flood, slow-header DoS, port scans and login bruteforcing, all on
// one shared clock, with a label rule per attack episode.
//
// Every generated connection lasts well under the flow timeout and uses a
// fresh 5-tuple, so a flow-engine replay yields exactly one flow per
// generated connection.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netsentry/dataset.hpp"
#include "netsentry/exchange.hpp"
#include "netsentry/rng.hpp"

namespace netsentry {

struct Range {
  double lo = 0, hi = 0;
  bool operator==(const Range &) const = default;
};

struct BenignProfile {
  Range requests{1, 6};              // exchanges per connection
  Range request_bytes{150, 1400};
  Range response_bytes{200, 60000};
  Range think_s{0.05, 7.0};          // pause between exchanges
  Range rtt_ms{2, 60};
  Range server_delay_ms{1, 120};
  double udp_fraction = 0.15;        // DNS-style single datagram exchanges
  // Share of benign flows from LAN API pollers: short single-request
  // connections repeated every few seconds, timing-wise close to a flood.
  double poller_fraction = 0.3;
  Range poller_requests{3, 12};      // connections per polling session
  Range poller_interval_s{1, 4};
  Range poller_request_bytes{100, 400};
  Range poller_response_bytes{100, 2000};
  Range poller_rtt_ms{0.3, 20};
  Range poller_server_delay_ms{2, 40};
  bool operator==(const BenignProfile &) const = default;
};

struct FloodProfile {
  std::size_t request_bytes = 238;
  std::size_t response_bytes = 3270;
  Range rtt_ms{0.3, 2};
  Range server_delay_ms{2, 40};
  Range connection_gap_ms{5, 60}; // attacker pacing between connections
  bool operator==(const FloodProfile &) const = default;
};

struct SlowProfile {
  std::size_t fragment_bytes = 24;
  Range fragment_gap_s{2.5, 3.5};
  Range fragments{3, 6};
  bool operator==(const SlowProfile &) const = default;
};

struct ScanProfile {
  double open_fraction = 0.05;     // SYN/ACK then scanner RST
  double filtered_fraction = 0.10; // no answer, ends by timeout
  Range probe_gap_ms{1, 15};
  bool operator==(const ScanProfile &) const = default;
};

struct BruteProfile {
  Range attempts{2, 4};
  Range request_bytes{40, 60};
  Range response_bytes{20, 48};
  Range think_ms{50, 400};
  Range connection_gap_ms{100, 900};
  bool operator==(const BruteProfile &) const = default;
};

struct ScenarioSpec {
  std::uint64_t seed = 7;
  std::size_t clients = 60, servers = 12;
  double duration_s = 3600;
  std::size_t episodes = 10; // attack episodes per behavior, spread over the timeline
  std::size_t benign_flows = 12000;
  std::size_t flood_flows = 4000;
  std::size_t slow_flows = 400;
  std::size_t scan_flows = 2000;
  std::size_t brute_flows = 1600;
  BenignProfile benign;
  FloodProfile flood;
  SlowProfile slow;
  ScanProfile scan;
  BruteProfile brute;

  bool operator==(const ScenarioSpec &) const = default;

  // Default preset: ~20k flows over one hour.
  static ScenarioSpec standard(std::uint64_t seed = 7) {
    ScenarioSpec s;
    s.seed = seed;
    return s;
  }

  // Cross-domain preset: slower benign network and a flood tool with a
  // different request/response size.
  static ScenarioSpec cross_domain(std::uint64_t seed = 11) {
    ScenarioSpec s = standard(seed);
    s.benign.think_s = {0.1, 9.0};
    s.benign.rtt_ms = {5, 150};
    s.benign.server_delay_ms = {3, 250};
    s.flood.request_bytes = 180;
    s.flood.response_bytes = 1200;
    return s;
  }

  void validate() const {
    if (clients == 0 || servers == 0) throw ConfigError("scenario: needs at least one client and one server");
    if (duration_s <= 0) throw ConfigError("scenario: duration must be positive");
    if (episodes == 0) throw ConfigError("scenario: episodes must be >= 1");
    if (clients > 250 || servers > 250) throw ConfigError("scenario: at most 250 clients and 250 servers");
  }
};

namespace detail {

inline nlohmann::json range_json(const Range &r) { return {r.lo, r.hi}; }
inline Range range_from(const nlohmann::json &j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

} // namespace detail

inline nlohmann::json to_json(const ScenarioSpec &s) {
  using detail::range_json;
  return {{"format", "netsentry.scenario"},
          {"version", 1},
          {"seed", s.seed},
          {"clients", s.clients},
          {"servers", s.servers},
          {"duration_s", s.duration_s},
          {"episodes", s.episodes},
          {"flows",
           {{"benign", s.benign_flows},
            {"dos_hulk", s.flood_flows},
            {"dos_slowloris", s.slow_flows},
            {"portscan", s.scan_flows},
            {"ssh_bruteforce", s.brute_flows}}},
          {"benign",
           {{"requests", range_json(s.benign.requests)},
            {"request_bytes", range_json(s.benign.request_bytes)},
            {"response_bytes", range_json(s.benign.response_bytes)},
            {"think_s", range_json(s.benign.think_s)},
            {"rtt_ms", range_json(s.benign.rtt_ms)},
            {"server_delay_ms", range_json(s.benign.server_delay_ms)},
            {"udp_fraction", s.benign.udp_fraction},
            {"poller_fraction", s.benign.poller_fraction},
            {"poller_requests", range_json(s.benign.poller_requests)},
            {"poller_interval_s", range_json(s.benign.poller_interval_s)},
            {"poller_request_bytes", range_json(s.benign.poller_request_bytes)},
            {"poller_response_bytes", range_json(s.benign.poller_response_bytes)},
            {"poller_rtt_ms", range_json(s.benign.poller_rtt_ms)},
            {"poller_server_delay_ms", range_json(s.benign.poller_server_delay_ms)}}},
          {"dos_hulk",
           {{"request_bytes", s.flood.request_bytes},
            {"response_bytes", s.flood.response_bytes},
            {"rtt_ms", range_json(s.flood.rtt_ms)},
            {"server_delay_ms", range_json(s.flood.server_delay_ms)},
            {"connection_gap_ms", range_json(s.flood.connection_gap_ms)}}},
          {"dos_slowloris",
           {{"fragment_bytes", s.slow.fragment_bytes},
            {"fragment_gap_s", range_json(s.slow.fragment_gap_s)},
            {"fragments", range_json(s.slow.fragments)}}},
          {"portscan",
           {{"open_fraction", s.scan.open_fraction},
            {"filtered_fraction", s.scan.filtered_fraction},
            {"probe_gap_ms", range_json(s.scan.probe_gap_ms)}}},
          {"ssh_bruteforce",
           {{"attempts", range_json(s.brute.attempts)},
            {"request_bytes", range_json(s.brute.request_bytes)},
            {"response_bytes", range_json(s.brute.response_bytes)},
            {"think_ms", range_json(s.brute.think_ms)},
            {"connection_gap_ms", range_json(s.brute.connection_gap_ms)}}}};
}

// Missing keys keep the values of `base` (the standard preset by default).
inline ScenarioSpec scenario_from_json(const nlohmann::json &j, ScenarioSpec s = ScenarioSpec::standard()) {
  using detail::range_from;
  try {
    static const std::set<std::string> known = {"format",   "version", "preset",        "seed",          "clients",
                                                "servers",  "duration_s", "episodes",    "flows",         "benign",
                                                "dos_hulk", "dos_slowloris", "portscan", "ssh_bruteforce"};
    for (const auto &[k, v] : j.items())
      if (!known.contains(k)) throw ConfigError("scenario: unknown key '" + k + "'");
    if (j.contains("preset")) {
      const auto p = j.at("preset").get<std::string>();
      if (p == "standard") s = ScenarioSpec::standard();
      else if (p == "cross_domain") s = ScenarioSpec::cross_domain();
      else throw ConfigError("scenario: unknown preset '" + p + "'");
    }
    auto get = [&](const nlohmann::json &o, const char *k, auto &dst) {
      if (o.contains(k)) dst = o.at(k).get<std::remove_reference_t<decltype(dst)>>();
    };
    auto getr = [&](const nlohmann::json &o, const char *k, Range &dst) {
      if (o.contains(k)) dst = range_from(o.at(k));
    };
    get(j, "seed", s.seed);
    get(j, "clients", s.clients);
    get(j, "servers", s.servers);
    get(j, "duration_s", s.duration_s);
    get(j, "episodes", s.episodes);
    if (j.contains("flows")) {
      const auto &f = j.at("flows");
      get(f, "benign", s.benign_flows);
      get(f, "dos_hulk", s.flood_flows);
      get(f, "dos_slowloris", s.slow_flows);
      get(f, "portscan", s.scan_flows);
      get(f, "ssh_bruteforce", s.brute_flows);
    }
    if (j.contains("benign")) {
      const auto &b = j.at("benign");
      getr(b, "requests", s.benign.requests);
      getr(b, "request_bytes", s.benign.request_bytes);
      getr(b, "response_bytes", s.benign.response_bytes);
      getr(b, "think_s", s.benign.think_s);
      getr(b, "rtt_ms", s.benign.rtt_ms);
      getr(b, "server_delay_ms", s.benign.server_delay_ms);
      get(b, "udp_fraction", s.benign.udp_fraction);
      get(b, "poller_fraction", s.benign.poller_fraction);
      getr(b, "poller_requests", s.benign.poller_requests);
      getr(b, "poller_interval_s", s.benign.poller_interval_s);
      getr(b, "poller_request_bytes", s.benign.poller_request_bytes);
      getr(b, "poller_response_bytes", s.benign.poller_response_bytes);
      getr(b, "poller_rtt_ms", s.benign.poller_rtt_ms);
      getr(b, "poller_server_delay_ms", s.benign.poller_server_delay_ms);
    }
    if (j.contains("dos_hulk")) {
      const auto &b = j.at("dos_hulk");
      get(b, "request_bytes", s.flood.request_bytes);
      get(b, "response_bytes", s.flood.response_bytes);
      getr(b, "rtt_ms", s.flood.rtt_ms);
      getr(b, "server_delay_ms", s.flood.server_delay_ms);
      getr(b, "connection_gap_ms", s.flood.connection_gap_ms);
    }
    if (j.contains("dos_slowloris")) {
      const auto &b = j.at("dos_slowloris");
      get(b, "fragment_bytes", s.slow.fragment_bytes);
      getr(b, "fragment_gap_s", s.slow.fragment_gap_s);
      getr(b, "fragments", s.slow.fragments);
    }
    if (j.contains("portscan")) {
      const auto &b = j.at("portscan");
      get(b, "open_fraction", s.scan.open_fraction);
      get(b, "filtered_fraction", s.scan.filtered_fraction);
      getr(b, "probe_gap_ms", s.scan.probe_gap_ms);
    }
    if (j.contains("ssh_bruteforce")) {
      const auto &b = j.at("ssh_bruteforce");
      getr(b, "attempts", s.brute.attempts);
      getr(b, "request_bytes", s.brute.request_bytes);
      getr(b, "response_bytes", s.brute.response_bytes);
      getr(b, "think_ms", s.brute.think_ms);
      getr(b, "connection_gap_ms", s.brute.connection_gap_ms);
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

struct Corpus {
  std::vector<PacketRecord> packets; // time-ordered, ordinals 0..n-1
  std::vector<LabelRule> rules;
  std::size_t connections = 0;       // generated flows, all classes
};

namespace detail {

class Generator {
public:
  explicit Generator(const ScenarioSpec &s) : s_(s), rng_(substream(s.seed, stream::Synth)) {
    for (std::size_t i = 0; i < s.clients; ++i) clients_.push_back(IpAddress::parse("192.168.10." + std::to_string(i + 2)));
    for (std::size_t i = 0; i < s.servers; ++i) servers_.push_back(IpAddress::parse("10.0.0." + std::to_string(i + 2)));
    ports_.assign(256 * 4, 0);
  }

  Corpus run() {
    const auto dur = static_cast<std::int64_t>(s_.duration_s * 1e6);
    benign(dur);
    attack_family("dos_hulk", s_.flood_flows, 0, dur, [&](std::size_t n, std::int64_t t0, IpAddress a, IpAddress v) {
      return flood(n, t0, a, v);
    });
    attack_family("dos_slowloris", s_.slow_flows, 1, dur, [&](std::size_t n, std::int64_t t0, IpAddress a, IpAddress v) {
      return slow(n, t0, a, v);
    });
    attack_family("portscan", s_.scan_flows, 2, dur, [&](std::size_t n, std::int64_t t0, IpAddress a, IpAddress v) {
      return scan(n, t0, a, v);
    });
    attack_family("ssh_bruteforce", s_.brute_flows, 3, dur, [&](std::size_t n, std::int64_t t0, IpAddress a, IpAddress v) {
      return brute(n, t0, a, v);
    });
    std::stable_sort(out_.packets.begin(), out_.packets.end(),
                     [](const PacketRecord &a, const PacketRecord &b) { return a.timestamp_us < b.timestamp_us; });
    for (std::size_t i = 0; i < out_.packets.size(); ++i) out_.packets[i].ordinal = i;
    return std::move(out_);
  }

private:
  double u(const Range &r) { return r.lo == r.hi ? r.lo : uniform(rng_, r.lo, r.hi); }
  std::size_t ui(const Range &r) {
    return static_cast<std::size_t>(uniform_int(rng_, std::llround(r.lo), std::llround(r.hi)));
  }
  std::int64_t ms(const Range &r) { return std::llround(u(r) * 1e3); }
  std::int64_t sec(const Range &r) { return std::llround(u(r) * 1e6); }

  // Fresh ephemeral port per host, so 5-tuples never repeat.
  std::uint16_t port(const IpAddress &ip) {
    auto &p = ports_[slot(ip)];
    if (p == 0) p = static_cast<std::uint16_t>(20000 + uniform_int(rng_, 0, 9999));
    p = p >= 65000 ? 20000 : static_cast<std::uint16_t>(p + 1);
    return p;
  }
  std::size_t slot(const IpAddress &ip) const {
    const auto s = ip.to_string();
    const std::size_t last = static_cast<std::size_t>(std::stoi(s.substr(s.rfind('.') + 1)));
    const std::size_t group = s.rfind("192.168.10.", 0) == 0 ? 0 : s.rfind("10.0.0.", 0) == 0 ? 1 : s.rfind("203.0.113.", 0) == 0 ? 2 : 3;
    return group * 256 + last;
  }

  void add(std::vector<PacketRecord> pkts) {
    ++out_.connections;
    std::move(pkts.begin(), pkts.end(), std::back_inserter(out_.packets));
  }

  void pollers(std::size_t flows, std::int64_t dur) {
    const auto &b = s_.benign;
    std::size_t made = 0;
    while (made < flows) {
      const auto client = clients_[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<std::int64_t>(clients_.size()) - 1))];
      const auto server = servers_[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<std::int64_t>(servers_.size()) - 1))];
      const std::size_t k = std::min(flows - made, ui(b.poller_requests));
      std::int64_t t = uniform_int(rng_, 0, dur - 90'000'000);
      for (std::size_t i = 0; i < k; ++i, ++made) {
        ConnectionSpec c;
        c.client = client;
        c.server = server;
        c.client_port = port(client);
        c.server_port = 80;
        c.start_us = t;
        c.rtt_us = ms(b.poller_rtt_ms);
        c.segment_gap_us = 30;
        c.client_window = 29200;
        c.exchanges.push_back({ui(b.poller_request_bytes), ui(b.poller_response_bytes), ms(b.poller_server_delay_ms), 0});
        add(simulate_connection(c));
        t += sec(b.poller_interval_s);
      }
    }
  }

  void benign(std::int64_t dur) {
    const auto &b = s_.benign;
    const auto polled = static_cast<std::size_t>(std::llround(b.poller_fraction * static_cast<double>(s_.benign_flows)));
    pollers(polled, dur);
    for (std::size_t n = polled; n < s_.benign_flows; ++n) {
      const auto client = clients_[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<std::int64_t>(clients_.size()) - 1))];
      // clients favour a few servers each
      const auto pick = uniform(rng_, 0, 1) < 0.7 ? slot(client) % servers_.size()
                                                  : static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<std::int64_t>(servers_.size()) - 1));
      const auto server = servers_[pick];
      const std::int64_t start = uniform_int(rng_, 0, dur - 30'000'000);
      if (uniform(rng_, 0, 1) < b.udp_fraction) {
        add(dns(client, server, start));
        continue;
      }
      ConnectionSpec c;
      c.client = client;
      c.server = server;
      c.client_port = port(client);
      c.server_port = uniform(rng_, 0, 1) < 0.8 ? 443 : 80;
      c.start_us = start;
      c.rtt_us = ms(b.rtt_ms);
      c.segment_gap_us = std::max<std::int64_t>(20, c.rtt_us / 40);
      c.client_window = static_cast<std::uint16_t>(uniform_int(rng_, 8192, 65535));
      const std::size_t k = ui(b.requests);
      std::int64_t budget = 24'000'000; // keep the connection under the flow timeout
      for (std::size_t i = 0; i < k; ++i) {
        Exchange x;
        x.request_bytes = ui(b.request_bytes);
        x.response_bytes = ui(b.response_bytes);
        x.server_delay_us = ms(b.server_delay_ms);
        x.think_us = i == 0 ? 0 : sec(b.think_s);
        const auto cost = x.think_us + x.server_delay_us +
                          static_cast<std::int64_t>((x.request_bytes + x.response_bytes) / kMss + 2) * c.segment_gap_us +
                          c.rtt_us;
        if (cost > budget) break;
        budget -= cost;
        c.exchanges.push_back(x);
      }
      if (c.exchanges.empty()) c.exchanges.push_back({ui(b.request_bytes), ui(b.response_bytes), ms(b.server_delay_ms), 0});
      add(simulate_connection(c));
    }
  }

  // One query datagram and one answer; the flow ends by timeout.
  std::vector<PacketRecord> dns(IpAddress client, IpAddress server, std::int64_t start) {
    PacketRecord q;
    q.timestamp_us = start;
    q.src_ip = client;
    q.dst_ip = server;
    q.src_port = port(client);
    q.dst_port = 53;
    q.protocol = Protocol::UDP;
    q.header_len_bytes = 28;
    q.payload_len_bytes = static_cast<std::uint32_t>(uniform_int(rng_, 28, 60));
    PacketRecord a = q;
    a.timestamp_us = start + ms(s_.benign.rtt_ms);
    std::swap(a.src_ip, a.dst_ip);
    std::swap(a.src_port, a.dst_port);
    a.payload_len_bytes = static_cast<std::uint32_t>(uniform_int(rng_, 60, 400));
    return {q, a};
  }

  template <class Fn> void attack_family(const std::string &name, std::size_t flows, std::size_t family, std::int64_t dur, Fn fn) {
    if (flows == 0) return;
    const std::size_t E = std::min(s_.episodes, flows);
    const std::int64_t slot_len = dur / static_cast<std::int64_t>(E);
    for (std::size_t e = 0; e < E; ++e) {
      const std::size_t n = flows / E + (e < flows % E ? 1 : 0);
      const IpAddress attacker = IpAddress::parse("203.0.113." + std::to_string(10 + family * 20 + e % 20));
      const IpAddress victim = servers_[(family + e) % servers_.size()];
      const std::int64_t t0 = static_cast<std::int64_t>(e) * slot_len + uniform_int(rng_, 0, slot_len / 2);
      const auto before = out_.packets.size();
      const std::int64_t last = fn(n, t0, attacker, victim);
      (void)before;
      LabelRule r;
      r.attack_name = name;
      r.attacker_ips = {attacker};
      r.victim_ips = {victim};
      r.start_us = t0;
      r.end_us = last + 1;
      out_.rules.push_back(std::move(r));
    }
  }

  // Returns the latest packet time of the episode.
  std::int64_t flood(std::size_t n, std::int64_t t, IpAddress a, IpAddress v) {
    const auto &f = s_.flood;
    std::int64_t last = t;
    for (std::size_t i = 0; i < n; ++i) {
      ConnectionSpec c;
      c.client = a;
      c.server = v;
      c.client_port = port(a);
      c.server_port = 80;
      c.start_us = t;
      c.rtt_us = ms(f.rtt_ms);
      c.segment_gap_us = 30;
      c.client_window = 29200;
      c.exchanges.push_back({f.request_bytes, f.response_bytes, ms(f.server_delay_ms), 0});
      auto pkts = simulate_connection(c);
      last = std::max(last, pkts.back().timestamp_us);
      add(std::move(pkts));
      t += ms(f.connection_gap_ms);
    }
    return last;
  }

  // Holds connections open with partial headers, then gives up with FIN.
  std::int64_t slow(std::size_t n, std::int64_t t, IpAddress a, IpAddress v) {
    const auto &sl = s_.slow;
    std::int64_t last = t;
    for (std::size_t i = 0; i < n; ++i) {
      ConnectionSpec c;
      c.client = a;
      c.server = v;
      c.client_port = port(a);
      c.server_port = 80;
      c.start_us = t;
      c.rtt_us = 1000;
      c.client_window = 29200;
      const std::size_t k = ui(sl.fragments);
      for (std::size_t j = 0; j < k; ++j) c.exchanges.push_back({sl.fragment_bytes, 0, 0, j == 0 ? 0 : sec(sl.fragment_gap_s)});
      auto pkts = simulate_connection(c);
      last = std::max(last, pkts.back().timestamp_us);
      add(std::move(pkts));
      t += uniform_int(rng_, 5'000, 40'000);
    }
    return last;
  }

  std::int64_t scan(std::size_t n, std::int64_t t, IpAddress a, IpAddress v) {
    const auto &sc = s_.scan;
    const auto sport = port(a);
    std::int64_t last = t;
    std::uint16_t dport = static_cast<std::uint16_t>(uniform_int(rng_, 1, 2000));
    for (std::size_t i = 0; i < n; ++i) {
      PacketRecord syn;
      syn.timestamp_us = t;
      syn.src_ip = a;
      syn.dst_ip = v;
      syn.src_port = sport;
      syn.dst_port = dport;
      dport = dport >= 65535 ? 1 : static_cast<std::uint16_t>(dport + 1);
      syn.protocol = Protocol::TCP;
      syn.tcp_flags = tcp::SYN;
      syn.header_len_bytes = 44;
      syn.tcp_window = 1024;
      std::vector<PacketRecord> pkts{syn};
      const double r = uniform(rng_, 0, 1);
      if (r >= sc.filtered_fraction) {
        PacketRecord ans = syn;
        ans.timestamp_us = t + uniform_int(rng_, 100, 900);
        std::swap(ans.src_ip, ans.dst_ip);
        std::swap(ans.src_port, ans.dst_port);
        ans.header_len_bytes = 40;
        ans.tcp_window = 0;
        if (r < sc.filtered_fraction + sc.open_fraction) {
          ans.tcp_flags = tcp::SYN | tcp::ACK;
          ans.tcp_window = 65160;
          ans.header_len_bytes = 44;
          PacketRecord rst = syn;
          rst.timestamp_us = ans.timestamp_us + uniform_int(rng_, 20, 200);
          rst.tcp_flags = tcp::RST;
          rst.header_len_bytes = 40;
          rst.tcp_window = 0;
          pkts.push_back(ans);
          pkts.push_back(rst);
        } else {
          ans.tcp_flags = tcp::RST | tcp::ACK;
          pkts.push_back(ans);
        }
      }
      last = std::max(last, pkts.back().timestamp_us);
      add(std::move(pkts));
      t += ms(sc.probe_gap_ms);
    }
    return last;
  }

  std::int64_t brute(std::size_t n, std::int64_t t, IpAddress a, IpAddress v) {
    const auto &br = s_.brute;
    std::int64_t last = t;
    for (std::size_t i = 0; i < n; ++i) {
      ConnectionSpec c;
      c.client = a;
      c.server = v;
      c.client_port = port(a);
      c.server_port = 22;
      c.start_us = t;
      c.rtt_us = uniform_int(rng_, 500, 3000);
      c.client_window = 64240;
      // server banner is folded into the first response
      const std::size_t k = ui(br.attempts);
      for (std::size_t j = 0; j < k; ++j)
        c.exchanges.push_back({ui(br.request_bytes), ui(br.response_bytes), uniform_int(rng_, 1'000, 4'000), j == 0 ? 0 : ms(br.think_ms)});
      auto pkts = simulate_connection(c);
      last = std::max(last, pkts.back().timestamp_us);
      add(std::move(pkts));
      t += ms(br.connection_gap_ms);
    }
    return last;
  }

  ScenarioSpec s_;
  Rng rng_;
  std::vector<IpAddress> clients_, servers_;
  std::vector<std::uint16_t> ports_;
  Corpus out_;
};

} // namespace detail

inline Corpus generate(const ScenarioSpec &spec) {
  spec.validate();
  return detail::Generator(spec).run();
}

} // namespace netsentry
