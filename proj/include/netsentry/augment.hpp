#pragma once

// Payload-feature augmentation for single-request HTTP DoS sequences. An
// AugBase of simulated request/response exchanges supplies payload features;
// each eligible training sequence takes one AugBase row, replicated over its
// real timesteps with small Gaussian noise, in place of its own payload
// features. Timing features, labels and padding are never touched.

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "netsentry/dataset.hpp"
#include "netsentry/exchange.hpp"
#include "netsentry/features.hpp"
#include "netsentry/flow.hpp"
#include "netsentry/rng.hpp"
#include "netsentry/sequence.hpp"
#include "netsentry/text.hpp"

namespace netsentry {

inline constexpr std::size_t kPayloadFeatures = 18;

struct AugBaseEntry {
  std::size_t request_bytes = 0;
  std::size_t response_bytes = 0;
  std::array<double, kPayloadFeatures> payload{}; // in payload_feature_indices() order
};

struct AugBase {
  std::uint64_t seed = 0;
  std::vector<AugBaseEntry> entries;
};

struct AugBaseConfig {
  std::size_t size = 2000;
  std::size_t request_min = 100, request_max = 400;
  std::size_t response_min = 100, response_max = 15000;
};

// Payload features of one simulated keep-alive connection carrying a single
// request and its response.
inline std::array<double, kPayloadFeatures> simulate_payload_features(std::size_t request_bytes,
                                                                      std::size_t response_bytes) {
  ConnectionSpec c;
  c.client = IpAddress::parse("10.255.0.1");
  c.server = IpAddress::parse("10.255.0.2");
  c.client_port = 40000;
  c.exchanges.push_back({request_bytes, response_bytes, 1000, 0});
  const auto pkts = simulate_connection(c);
  const auto flows = aggregate_flows(pkts);
  require(flows.size() == 1, "augbase: simulated exchange did not form one flow");
  const auto fv = extract_features(flows.front());
  std::array<double, kPayloadFeatures> out{};
  const auto &idx = payload_feature_indices();
  for (std::size_t i = 0; i < kPayloadFeatures; ++i) out[i] = fv.stats[idx[i]];
  return out;
}

inline AugBase build_augbase(std::uint64_t seed, const AugBaseConfig &cfg = {}) {
  require(cfg.request_min <= cfg.request_max && cfg.response_min <= cfg.response_max, "augbase: empty size range");
  auto rng = substream(seed, stream::AugBase);
  std::uniform_int_distribution<std::size_t> req(cfg.request_min, cfg.request_max);
  std::uniform_int_distribution<std::size_t> resp(cfg.response_min, cfg.response_max);
  AugBase base;
  base.seed = seed;
  base.entries.reserve(cfg.size);
  for (std::size_t i = 0; i < cfg.size; ++i) {
    AugBaseEntry e;
    e.request_bytes = req(rng);
    e.response_bytes = resp(rng);
    e.payload = simulate_payload_features(e.request_bytes, e.response_bytes);
    base.entries.push_back(e);
  }
  return base;
}

inline void write_augbase_csv(const std::string &path, const AugBase &base) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write augbase: " + path);
  out << "# seed=" << base.seed << '\n' << "request_bytes,response_bytes";
  for (auto i : payload_feature_indices()) out << ',' << stat_feature_names()[i];
  out << '\n';
  for (const auto &e : base.entries) {
    out << e.request_bytes << ',' << e.response_bytes;
    for (double v : e.payload) out << ',' << text::format_double(v);
    out << '\n';
  }
}

inline AugBase read_augbase_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open augbase: " + path);
  AugBase base;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    if (line.rfind("# seed=", 0) == 0) {
      base.seed = static_cast<std::uint64_t>(text::to_int(line.substr(7)));
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const auto cells = text::split(line, ',');
    if (cells.size() != 2 + kPayloadFeatures) throw FormatError("augbase: bad column count");
    AugBaseEntry e;
    e.request_bytes = static_cast<std::size_t>(text::to_int(cells[0]));
    e.response_bytes = static_cast<std::size_t>(text::to_int(cells[1]));
    for (std::size_t i = 0; i < kPayloadFeatures; ++i) e.payload[i] = text::to_double(cells[2 + i]);
    base.entries.push_back(e);
  }
  return base;
}

inline bool is_augmentable(const FlowSequence &s) {
  if (s.real_count() == 0) return false;
  for (std::size_t t = 0; t < s.alpha(); ++t)
    if (s.pad_mask[t] && !is_augmentable_label(s.labels[t])) return false;
  return true;
}

struct AugmentConfig {
  double noise_sd = 5.0; // raw feature units
};

// Replaces the payload features of every real row with one sampled AugBase
// row plus independent N(0, noise_sd) noise per cell. Bytes/sec and subflow
// bytes are first recomputed from the sampled sizes and the row's own
// duration and subflow count.
inline FlowSequence augment_sequence(FlowSequence seq, const AugBase &base, Rng &rng, const AugmentConfig &cfg = {}) {
  if (!is_augmentable(seq)) throw PreconditionError("augment_sequence: sequence is not single-request HTTP DoS");
  require(!base.entries.empty(), "augment_sequence: empty augbase");
  const auto &e = base.entries[std::uniform_int_distribution<std::size_t>(0, base.entries.size() - 1)(rng)];
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);
  const auto &idx = payload_feature_indices();
  const auto fwd = static_cast<double>(e.request_bytes), bwd = static_cast<double>(e.response_bytes);
  for (std::size_t t = 0; t < seq.alpha(); ++t) {
    if (!seq.pad_mask[t]) continue;
    auto &s = seq.flows[t].stats;
    std::array<double, kPayloadFeatures> v = e.payload;
    const double duration = s[feat::Duration];
    const double fwd_pkts = s[feat::FwdBlock + feat::Packets];
    const double fwd_sub = s[feat::FwdBlock + feat::SubflowPkts];
    const double subflows = fwd_sub > 0 ? fwd_pkts / fwd_sub : 1.0;
    for (std::size_t i = 0; i < kPayloadFeatures; ++i) {
      if (idx[i] == feat::FlowBytesPerSec) v[i] = duration > 0 ? (fwd + bwd) / duration : 0.0;
      else if (idx[i] == feat::FwdBlock + feat::SubflowBytes) v[i] = fwd / subflows;
      else if (idx[i] == feat::BwdBlock + feat::SubflowBytes) v[i] = bwd / subflows;
    }
    for (std::size_t i = 0; i < kPayloadFeatures; ++i) s[idx[i]] = v[i] + noise(rng);
  }
  return seq;
}

struct AugmentStats {
  std::size_t eligible = 0, augmented = 0;
};

// Augments every eligible sequence (training split only); all others pass
// through unchanged. Order is preserved.
inline std::vector<FlowSequence> augment_training_set(std::vector<FlowSequence> seqs, const AugBase &base, Rng &rng,
                                                      AugmentStats *stats = nullptr, const AugmentConfig &cfg = {}) {
  AugmentStats st;
  for (auto &s : seqs) {
    if (!is_augmentable(s)) continue;
    ++st.eligible;
    s = augment_sequence(std::move(s), base, rng, cfg);
    ++st.augmented;
  }
  if (stats) *stats = st;
  return seqs;
}

} // namespace netsentry
