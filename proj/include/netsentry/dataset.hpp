#pragma once

// Ground-truth labels, abstract classes, min-max normalization and the
// time-consistent train/test split.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "netsentry/error.hpp"
#include "netsentry/features.hpp"

namespace netsentry {

// ---- label rules ------------------------------------------------------------

struct LabelRule {
  std::set<IpAddress> attacker_ips;
  std::set<IpAddress> victim_ips; // empty = any peer
  std::int64_t start_us = 0;      // inclusive
  std::int64_t end_us = 0;        // exclusive
  std::string attack_name;

  bool matches(const FeatureVector &f) const {
    if (f.start_us < start_us || f.start_us >= end_us) return false;
    auto victim = [&](const IpAddress &a) { return victim_ips.empty() || victim_ips.contains(a); };
    return (attacker_ips.contains(f.src_ip) && victim(f.dst_ip)) ||
           (attacker_ips.contains(f.dst_ip) && victim(f.src_ip));
  }

  // The flow's attacker-side address, if the rule matches it.
  bool attacker_is_source(const FeatureVector &f) const { return attacker_ips.contains(f.src_ip); }
};

inline void validate(const LabelRule &r) {
  if (r.start_us >= r.end_us) throw ConfigError("label rule '" + r.attack_name + "': start must be < end");
  if (r.attacker_ips.empty()) throw ConfigError("label rule '" + r.attack_name + "': no attacker addresses");
  if (r.attack_name.empty()) throw ConfigError("label rule without attack name");
}

// Returns the rule matching `f`, nullptr for benign. Conflicting matches are a
// configuration error.
inline const LabelRule *match_rule(const FeatureVector &f, std::span<const LabelRule> rules) {
  const LabelRule *hit = nullptr;
  for (const auto &r : rules) {
    if (!r.matches(f)) continue;
    if (hit && hit->attack_name != r.attack_name)
      throw ConfigError("overlapping label rules '" + hit->attack_name + "' and '" + r.attack_name +
                        "' both match flow " + f.flow_id);
    hit = &r;
  }
  return hit;
}

inline void assign_labels(std::span<FeatureVector> flows, std::span<const LabelRule> rules) {
  for (const auto &r : rules) validate(r);
  for (auto &f : flows) {
    const auto *r = match_rule(f, rules);
    f.label = r ? r->attack_name : "benign";
  }
}

inline nlohmann::json rules_to_json(std::span<const LabelRule> rules) {
  auto arr = nlohmann::json::array();
  for (const auto &r : rules) {
    nlohmann::json j;
    j["attack"] = r.attack_name;
    j["start_us"] = r.start_us;
    j["end_us"] = r.end_us;
    j["attackers"] = nlohmann::json::array();
    for (const auto &a : r.attacker_ips) j["attackers"].push_back(a.to_string());
    j["victims"] = nlohmann::json::array();
    for (const auto &a : r.victim_ips) j["victims"].push_back(a.to_string());
    arr.push_back(std::move(j));
  }
  return {{"format", "netsentry.label_rules"}, {"version", 1}, {"rules", arr}};
}

inline std::vector<LabelRule> rules_from_json(const nlohmann::json &j) {
  std::vector<LabelRule> out;
  try {
    for (const auto &jr : j.at("rules")) {
      LabelRule r;
      r.attack_name = jr.at("attack").get<std::string>();
      r.start_us = jr.at("start_us").get<std::int64_t>();
      r.end_us = jr.at("end_us").get<std::int64_t>();
      for (const auto &a : jr.at("attackers")) r.attacker_ips.insert(IpAddress::parse(a.get<std::string>()));
      if (jr.contains("victims"))
        for (const auto &a : jr.at("victims")) r.victim_ips.insert(IpAddress::parse(a.get<std::string>()));
      validate(r);
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("label rules: ") + e.what());
  }
  return out;
}

inline std::vector<LabelRule> load_rules(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label rules: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError("label rules " + path + ": " + e.what());
  }
  return rules_from_json(j);
}

inline void save_rules(const std::string &path, std::span<const LabelRule> rules) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write label rules: " + path);
  out << rules_to_json(rules).dump(2) << '\n';
}

// ---- abstract labels ---------------------------------------------------------

enum class AbstractLabel : std::uint8_t { BENIGN = 0, DOS, PORTSCAN, BRUTEFORCE_FUZZ, OTHER_MALICIOUS };

inline constexpr std::size_t kNumClasses = 5;

inline const std::array<std::string, kNumClasses> &abstract_label_names() {
  static const std::array<std::string, kNumClasses> n = {"BENIGN", "DOS", "PORTSCAN", "BRUTEFORCE_FUZZ",
                                                        "OTHER_MALICIOUS"};
  return n;
}

inline const std::string &to_string(AbstractLabel l) { return abstract_label_names()[static_cast<std::size_t>(l)]; }

// Specific attack name -> abstract class. Unknown names are rejected rather
// than guessed.
class LabelMap {
public:
  LabelMap() {
    using L = AbstractLabel;
    for (const char *n : {"benign"}) add(n, L::BENIGN);
    for (const char *n : {"dos", "ddos", "dos_http", "dos_hulk", "dos_goldeneye", "dos_slowloris", "dos_slowhttptest",
                          "dos_loic_http", "dos_hoic", "ddos_loic_http", "ddos_loic_udp", "ddos_hoic", "dos_syn_flood"})
      add(n, L::DOS);
    for (const char *n : {"portscan", "port_scan"}) add(n, L::PORTSCAN);
    for (const char *n : {"bruteforce", "ftp_bruteforce", "ssh_bruteforce", "web_bruteforce", "web_xss", "xss",
                          "sql_injection", "fuzzing"})
      add(n, L::BRUTEFORCE_FUZZ);
    for (const char *n : {"botnet", "bot_beacon", "infiltration", "heartbleed"}) add(n, L::OTHER_MALICIOUS);
    // canonical class names map onto themselves so the mapping is idempotent
    for (std::size_t i = 0; i < kNumClasses; ++i) add(abstract_label_names()[i], static_cast<AbstractLabel>(i));
  }

  void add(const std::string &name, AbstractLabel l) { table_[name] = l; }
  bool contains(const std::string &name) const { return table_.contains(name); }

  AbstractLabel operator()(const std::string &name) const {
    auto it = table_.find(name);
    if (it == table_.end()) throw ConfigError("no abstract class mapped for label '" + name + "'");
    return it->second;
  }

  const std::map<std::string, AbstractLabel> &entries() const { return table_; }

private:
  std::map<std::string, AbstractLabel> table_;
};

inline AbstractLabel abstractify(const std::string &label) {
  static const LabelMap map;
  return map(label);
}

// Single-request HTTP floods, the flows the augmentor rewrites. Slow-rate
// attacks keep connections open and are excluded.
inline bool is_augmentable_label(const std::string &label) {
  static const std::set<std::string> names = {"dos_http",      "dos_hulk",       "dos_goldeneye", "dos_loic_http",
                                              "dos_hoic",      "ddos_loic_http", "ddos_hoic"};
  return names.contains(label);
}

// ---- normalization -------------------------------------------------------------

struct NormalizationSpec {
  std::array<double, kModelFeatures> min{};
  std::array<double, kModelFeatures> max{};

  double apply(std::size_t i, double x) const {
    const double range = max[i] - min[i];
    if (!(range > 0)) return 0.0;
    return std::clamp((x - min[i]) / range, 0.0, 1.0);
  }

  double invert(std::size_t i, double y) const { return min[i] + y * (max[i] - min[i]); }

  std::array<double, kModelFeatures> apply(const std::array<double, kModelFeatures> &x) const {
    std::array<double, kModelFeatures> y{};
    for (std::size_t i = 0; i < kModelFeatures; ++i) y[i] = apply(i, x[i]);
    return y;
  }

  bool operator==(const NormalizationSpec &) const = default;
};

// Fits per-feature ranges on model-input rows (training data only).
inline NormalizationSpec fit_normalizer(std::span<const std::array<double, kModelFeatures>> rows) {
  NormalizationSpec s;
  if (rows.empty()) return s;
  s.min = rows.front();
  s.max = rows.front();
  for (const auto &r : rows)
    for (std::size_t i = 0; i < kModelFeatures; ++i) {
      s.min[i] = std::min(s.min[i], r[i]);
      s.max[i] = std::max(s.max[i], r[i]);
    }
  return s;
}

inline NormalizationSpec fit_normalizer(std::span<const FeatureVector> flows) {
  std::vector<std::array<double, kModelFeatures>> rows;
  rows.reserve(flows.size());
  for (const auto &f : flows) rows.push_back(f.model_input());
  return fit_normalizer(rows);
}

inline std::vector<std::array<double, kModelFeatures>> apply_normalizer(const NormalizationSpec &spec,
                                                                       std::span<const FeatureVector> flows) {
  std::vector<std::array<double, kModelFeatures>> out;
  out.reserve(flows.size());
  for (const auto &f : flows) out.push_back(spec.apply(f.model_input()));
  return out;
}

inline nlohmann::json to_json(const NormalizationSpec &s) {
  return {{"min", std::vector<double>(s.min.begin(), s.min.end())},
          {"max", std::vector<double>(s.max.begin(), s.max.end())}};
}

inline NormalizationSpec normalizer_from_json(const nlohmann::json &j) {
  NormalizationSpec s;
  const auto mn = j.at("min").get<std::vector<double>>();
  const auto mx = j.at("max").get<std::vector<double>>();
  if (mn.size() != kModelFeatures || mx.size() != kModelFeatures) throw FormatError("normalizer: expected 65 entries");
  std::copy(mn.begin(), mn.end(), s.min.begin());
  std::copy(mx.begin(), mx.end(), s.max.begin());
  return s;
}

// ---- time split ------------------------------------------------------------------

// Splits at the start-time quantile so every training flow starts strictly
// before every test flow. Input order is preserved within each part.
inline std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> time_split(std::vector<FeatureVector> flows,
                                                                                    double ratio = 0.7) {
  require(ratio > 0.0 && ratio < 1.0, "time_split: ratio must be in (0, 1)");
  require(flows.size() >= 2, "time_split: need at least two flows");
  std::vector<std::int64_t> starts;
  for (const auto &f : flows) starts.push_back(f.start_us);
  std::sort(starts.begin(), starts.end());
  if (starts.front() == starts.back()) throw PreconditionError("time_split: all flows share one timestamp");
  auto cut = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(flows.size())));
  cut = std::clamp<std::size_t>(cut, 1, flows.size() - 1);
  const std::int64_t boundary = starts[cut];
  std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> out;
  for (auto &f : flows) (f.start_us < boundary ? out.first : out.second).push_back(std::move(f));
  if (out.first.empty() || out.second.empty())
    throw PreconditionError("time_split: timestamps too coarse to split at this ratio");
  return out;
}

} // namespace netsentry
