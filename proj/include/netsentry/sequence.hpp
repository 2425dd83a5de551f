#pragma once

// Groups completed flows into fixed-length sequences keyed by
// (src IP, dst IP, protocol). A key's buffer is emitted as soon as it holds
// alpha flows; every tau of stream time the whole table is flushed and short
// buffers are padded up to alpha.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "netsentry/error.hpp"
#include "netsentry/features.hpp"

namespace netsentry {

struct SequenceKey {
  IpAddress src_ip;
  IpAddress dst_ip;
  Protocol protocol = Protocol::OTHER;

  static SequenceKey of(const FeatureVector &f) { return {f.src_ip, f.dst_ip, f.protocol()}; }

  bool operator==(const SequenceKey &) const = default;
};

struct SequenceKeyHash {
  std::size_t operator()(const SequenceKey &k) const noexcept {
    std::size_t h = std::hash<netsentry::IpAddress>{}(k.src_ip);
    h ^= std::hash<netsentry::IpAddress>{}(k.dst_ip) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h ^ std::size_t(k.protocol);
  }
};

struct FlowSequence {
  SequenceKey key;
  // alpha rows; rows past real_count() are zero padding
  std::vector<FeatureVector> flows;
  std::vector<bool> pad_mask; // true = real flow
  std::vector<std::string> labels;
  std::int64_t emitted_at_us = 0;

  std::size_t alpha() const { return flows.size(); }
  std::size_t real_count() const { return static_cast<std::size_t>(std::count(pad_mask.begin(), pad_mask.end(), true)); }
};

struct SequenceConfig {
  std::size_t alpha = 10;
  std::int64_t tau_us = 30'000'000;
};

inline FeatureVector padding_row() {
  FeatureVector f;
  f.label.clear();
  return f;
}

// Builds a sequence from at most alpha real flows, padding the rest.
inline FlowSequence make_sequence(const SequenceKey &key, std::vector<FeatureVector> real, std::size_t alpha,
                                  std::int64_t emitted_at_us) {
  require(!real.empty() && real.size() <= alpha, "make_sequence: need 1..alpha real flows");
  std::stable_sort(real.begin(), real.end(),
                   [](const FeatureVector &a, const FeatureVector &b) { return a.start_us < b.start_us; });
  FlowSequence s;
  s.key = key;
  s.emitted_at_us = emitted_at_us;
  for (auto &f : real) {
    s.labels.push_back(f.label);
    s.flows.push_back(std::move(f));
    s.pad_mask.push_back(true);
  }
  while (s.flows.size() < alpha) {
    s.flows.push_back(padding_row());
    s.labels.emplace_back();
    s.pad_mask.push_back(false);
  }
  return s;
}

class SequenceGenerator {
public:
  explicit SequenceGenerator(SequenceConfig cfg = {}) : cfg_(cfg) {
    require(cfg_.alpha >= 1, "sequence window alpha must be >= 1");
    require(cfg_.tau_us > 0, "sequence timeout tau must be > 0");
  }

  const SequenceConfig &config() const { return cfg_; }
  std::size_t buffered_keys() const { return table_.size(); }
  std::size_t buffered_flows() const {
    std::size_t n = 0;
    for (const auto &[k, b] : table_) n += b.flows.size();
    return n;
  }
  std::size_t flush_count() const { return flushes_; }

  // Appends a flow; emits its key's buffer once it reaches alpha.
  std::optional<FlowSequence> push_flow(FeatureVector fv) {
    const auto key = SequenceKey::of(fv);
    auto [it, fresh] = table_.try_emplace(key);
    if (fresh) it->second.order = next_order_++;
    it->second.flows.push_back(std::move(fv));
    if (it->second.flows.size() < cfg_.alpha) return std::nullopt;
    auto seq = make_sequence(key, std::move(it->second.flows), cfg_.alpha, clock_us_);
    table_.erase(it);
    return seq;
  }

  // Moves the stream clock forward, flushing once per elapsed tau.
  std::vector<FlowSequence> advance_clock(std::int64_t now_us) {
    std::vector<FlowSequence> out;
    if (!window_start_) window_start_ = now_us;
    clock_us_ = std::max(clock_us_, now_us);
    while (clock_us_ - *window_start_ >= cfg_.tau_us) {
      *window_start_ += cfg_.tau_us;
      const auto at = clock_us_;
      clock_us_ = *window_start_;
      auto flushed = flush();
      clock_us_ = at;
      std::move(flushed.begin(), flushed.end(), std::back_inserter(out));
    }
    return out;
  }

  // Clock-driven ingestion: the flow's end time advances the clock before the
  // flow joins the new window.
  std::vector<FlowSequence> consume(FeatureVector fv) {
    auto out = advance_clock(fv.end_us());
    if (auto s = push_flow(std::move(fv))) out.push_back(std::move(*s));
    return out;
  }

  // Emits every non-empty buffer (padded) in first-seen order; empties the table.
  std::vector<FlowSequence> flush() {
    std::vector<std::pair<std::uint64_t, SequenceKey>> order;
    for (const auto &[k, b] : table_) order.emplace_back(b.order, k);
    std::sort(order.begin(), order.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
    std::vector<FlowSequence> out;
    for (const auto &[o, k] : order) {
      auto &b = table_.at(k);
      out.push_back(make_sequence(k, std::move(b.flows), cfg_.alpha, clock_us_));
    }
    table_.clear();
    ++flushes_;
    return out;
  }

private:
  struct Bucket {
    std::vector<FeatureVector> flows;
    std::uint64_t order = 0;
  };

  SequenceConfig cfg_;
  std::unordered_map<SequenceKey, Bucket, SequenceKeyHash> table_;
  std::optional<std::int64_t> window_start_;
  std::int64_t clock_us_ = 0;
  std::uint64_t next_order_ = 0;
  std::size_t flushes_ = 0;
};

// Runs a whole flow list through a generator and drains it at the end.
inline std::vector<FlowSequence> build_sequences(std::vector<FeatureVector> flows, SequenceConfig cfg = {}) {
  SequenceGenerator gen(cfg);
  std::vector<FlowSequence> out;
  for (auto &f : flows) {
    auto emitted = gen.consume(std::move(f));
    std::move(emitted.begin(), emitted.end(), std::back_inserter(out));
  }
  auto rest = gen.flush();
  std::move(rest.begin(), rest.end(), std::back_inserter(out));
  return out;
}

} // namespace netsentry
