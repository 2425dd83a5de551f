#pragma once

// Bidirectional flow aggregation with a TCP teardown state machine.
//
// A TCP flow ends only after the full FIN -> ACK -> FIN -> ACK exchange, on
// RST from either side, or when the flow timeout expires. A FIN on its own
// does not end the flow, so a peer that reuses its source port right after a
// clean close starts a fresh flow with the correct initiator.

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "netsentry/error.hpp"
#include "netsentry/packet.hpp"

namespace netsentry {

struct FlowKey {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::OTHER;

  static FlowKey of(const PacketRecord &p) { return {p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol}; }

  FlowKey reversed() const { return {dst_ip, src_ip, dst_port, src_port, protocol}; }

  // Direction-independent form used for table lookup.
  FlowKey canonical() const {
    if (std::tie(src_ip, src_port) <= std::tie(dst_ip, dst_port)) return *this;
    return reversed();
  }

  bool operator==(const FlowKey &) const = default;
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey &k) const noexcept {
    std::size_t h = std::hash<IpAddress>{}(k.src_ip);
    h ^= std::hash<IpAddress>{}(k.dst_ip) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= (std::size_t(k.src_port) << 24) ^ (std::size_t(k.dst_port) << 8) ^ std::size_t(k.protocol);
    return h;
  }
};

enum class Direction : std::uint8_t { Forward, Backward };

enum class TcpPhase : std::uint8_t { OPEN, FIN_WAIT_1, FIN_WAIT_2, CLOSING, CLOSED };

enum class FlowEnd : std::uint8_t { None, Teardown, Reset, Timeout, EndOfStream };

struct FlowConfig {
  std::int64_t flow_timeout_us = 30'000'000;
  std::int64_t activity_threshold_us = 5'000'000;
  std::int64_t subflow_gap_us = 5'000'000;
};

struct FlowState {
  FlowKey key; // forward direction = first packet's direction
  std::vector<PacketRecord> fwd_packets;
  std::vector<PacketRecord> bwd_packets;
  std::vector<Direction> arrival; // direction of every packet, arrival order
  TcpPhase tcp_phase = TcpPhase::OPEN;
  Direction fin_side = Direction::Forward;
  std::int64_t start_us = 0;
  std::int64_t last_seen_us = 0;
  std::int64_t active_start_us = 0;
  std::vector<std::int64_t> active_periods;
  std::vector<std::int64_t> idle_periods;
  std::vector<std::int64_t> subflow_starts;
  FlowEnd end = FlowEnd::None;

  bool complete() const { return end != FlowEnd::None; }
  std::size_t packet_count() const { return arrival.size(); }

  // All packets in arrival order.
  std::vector<PacketRecord> packets() const {
    std::vector<PacketRecord> out;
    out.reserve(arrival.size());
    std::size_t f = 0, b = 0;
    for (auto d : arrival) out.push_back(d == Direction::Forward ? fwd_packets[f++] : bwd_packets[b++]);
    return out;
  }
};

namespace detail {

inline void advance_tcp(FlowState &f, Direction dir, const PacketRecord &p) {
  if (p.has(tcp::RST)) {
    f.tcp_phase = TcpPhase::CLOSED;
    return;
  }
  switch (f.tcp_phase) {
  case TcpPhase::OPEN:
    if (p.has(tcp::FIN)) {
      f.tcp_phase = TcpPhase::FIN_WAIT_1;
      f.fin_side = dir;
    }
    break;
  case TcpPhase::FIN_WAIT_1:
    if (dir != f.fin_side) {
      if (p.has(tcp::FIN)) f.tcp_phase = TcpPhase::CLOSING; // FIN+ACK folds the ACK in
      else if (p.has(tcp::ACK)) f.tcp_phase = TcpPhase::FIN_WAIT_2;
    }
    break;
  case TcpPhase::FIN_WAIT_2:
    if (dir != f.fin_side && p.has(tcp::FIN)) f.tcp_phase = TcpPhase::CLOSING;
    break;
  case TcpPhase::CLOSING:
    if (dir == f.fin_side && p.has(tcp::ACK)) f.tcp_phase = TcpPhase::CLOSED;
    break;
  case TcpPhase::CLOSED:
    break;
  }
}

} // namespace detail

// Owns the in-progress flows of one packet stream. Not thread-safe; use one
// table per capture.
class FlowTable {
public:
  explicit FlowTable(FlowConfig cfg = {}) : cfg_(cfg) {}

  const FlowConfig &config() const { return cfg_; }
  std::size_t active() const { return flows_.size(); }
  std::int64_t clock_us() const { return clock_us_; }

  // Absorbs one packet; returns every flow that completed as a result.
  std::vector<FlowState> ingest(const PacketRecord &pkt) {
    std::vector<FlowState> done;
    if (pkt.timestamp_us > clock_us_) clock_us_ = pkt.timestamp_us;
    if (clock_us_ >= next_sweep_us_) {
      expire(clock_us_, done);
      next_sweep_us_ = clock_us_ + kSweepIntervalUs;
    }

    const FlowKey key = FlowKey::of(pkt);
    const FlowKey canon = key.canonical();
    auto it = flows_.find(canon);
    if (it != flows_.end() && pkt.timestamp_us - it->second.state.start_us > cfg_.flow_timeout_us) {
      finish(it->second.state, FlowEnd::Timeout, done);
      flows_.erase(it);
      it = flows_.end();
    }
    if (it == flows_.end()) {
      Entry e;
      e.seq = next_seq_++;
      e.state.key = key;
      e.state.start_us = pkt.timestamp_us;
      e.state.last_seen_us = pkt.timestamp_us;
      e.state.active_start_us = pkt.timestamp_us;
      e.state.subflow_starts.push_back(pkt.timestamp_us);
      it = flows_.emplace(canon, std::move(e)).first;
    }

    FlowState &f = it->second.state;
    const Direction dir = key == f.key ? Direction::Forward : Direction::Backward;
    if (!f.arrival.empty()) {
      const std::int64_t gap = pkt.timestamp_us - f.last_seen_us;
      if (gap > cfg_.activity_threshold_us) {
        f.active_periods.push_back(f.last_seen_us - f.active_start_us);
        f.idle_periods.push_back(gap);
        f.active_start_us = pkt.timestamp_us;
      }
      if (gap > cfg_.subflow_gap_us) f.subflow_starts.push_back(pkt.timestamp_us);
    }
    (dir == Direction::Forward ? f.fwd_packets : f.bwd_packets).push_back(pkt);
    f.arrival.push_back(dir);
    f.last_seen_us = std::max(f.last_seen_us, pkt.timestamp_us);

    if (f.key.protocol == Protocol::TCP) {
      detail::advance_tcp(f, dir, pkt);
      if (f.tcp_phase == TcpPhase::CLOSED) {
        finish(f, pkt.has(tcp::RST) ? FlowEnd::Reset : FlowEnd::Teardown, done);
        flows_.erase(it);
      }
    }
    return done;
  }

  // Completes flows whose timeout has elapsed at stream time `now_us`.
  std::vector<FlowState> expire(std::int64_t now_us) {
    std::vector<FlowState> done;
    expire(now_us, done);
    return done;
  }

  // Completes every remaining flow (end of capture).
  std::vector<FlowState> flush_all() {
    std::vector<Entry *> order;
    for (auto &[k, e] : flows_) order.push_back(&e);
    sort_entries(order);
    std::vector<FlowState> done;
    for (auto *e : order) finish(e->state, FlowEnd::EndOfStream, done);
    flows_.clear();
    return done;
  }

private:
  static constexpr std::int64_t kSweepIntervalUs = 1'000'000;

  struct Entry {
    FlowState state;
    std::uint64_t seq = 0;
  };

  static void sort_entries(std::vector<Entry *> &v) {
    std::sort(v.begin(), v.end(), [](const Entry *a, const Entry *b) {
      return std::tie(a->state.start_us, a->seq) < std::tie(b->state.start_us, b->seq);
    });
  }

  static void finish(FlowState &f, FlowEnd why, std::vector<FlowState> &out) {
    f.active_periods.push_back(f.last_seen_us - f.active_start_us);
    f.end = why;
    out.push_back(std::move(f));
  }

  void expire(std::int64_t now_us, std::vector<FlowState> &done) {
    std::vector<Entry *> order;
    for (auto &[k, e] : flows_)
      if (now_us - e.state.start_us > cfg_.flow_timeout_us) order.push_back(&e);
    if (order.empty()) return;
    sort_entries(order);
    std::vector<FlowKey> keys;
    for (auto *e : order) {
      keys.push_back(e->state.key.canonical());
      finish(e->state, FlowEnd::Timeout, done);
    }
    for (const auto &k : keys) flows_.erase(k);
  }

  FlowConfig cfg_;
  std::unordered_map<FlowKey, Entry, FlowKeyHash> flows_;
  std::int64_t clock_us_ = 0;
  std::int64_t next_sweep_us_ = 0;
  std::uint64_t next_seq_ = 0;
};

// Replays a whole packet stream through a fresh table.
inline std::vector<FlowState> aggregate_flows(const std::vector<PacketRecord> &packets, FlowConfig cfg = {}) {
  FlowTable table(cfg);
  std::vector<FlowState> out;
  for (const auto &p : packets) {
    auto done = table.ingest(p);
    std::move(done.begin(), done.end(), std::back_inserter(out));
  }
  auto rest = table.flush_all();
  std::move(rest.begin(), rest.end(), std::back_inserter(out));
  return out;
}

} // namespace netsentry
