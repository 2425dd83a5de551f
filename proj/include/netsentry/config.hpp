#pragma once

// Pipeline configuration file: one JSON object, versioned, every section
// optional. Command-line flags override file values; each override of a value
// the file set explicitly is reported through the log callback.
//
//   {
//     "format": "netsentry.config", "version": 1,
//     "seed": 1,
//     "flow":     {"timeout_s": 30, "activity_threshold_s": 5, "subflow_gap_s": 5},
//     "sequence": {"alpha": 10, "tau_s": 30},
//     "augment":  {"augbase_size": 2000, "noise_sd": 5},
//     "train":    {"l2": 0.5, "lr": 0.001, "epochs": 10, "batch_size": 32, "nll": "sum"},
//     "evaluate": {"threshold": 0.5, "target_fpr": 0.015}
//   }

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "netsentry/augment.hpp"
#include "netsentry/bialstm.hpp"
#include "netsentry/error.hpp"
#include "netsentry/flow.hpp"
#include "netsentry/sequence.hpp"

namespace netsentry {

struct EvaluateConfig {
  double threshold = 0.5;
  double target_fpr = 0.015;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  FlowConfig flow;
  SequenceConfig sequence;
  AugBaseConfig augbase;
  AugmentConfig augment;
  TrainConfig train;
  EvaluateConfig evaluate;
  // dotted keys present in the file, e.g. "train.l2"
  std::vector<std::string> explicit_keys;

  bool from_file(const std::string &key) const {
    return std::find(explicit_keys.begin(), explicit_keys.end(), key) != explicit_keys.end();
  }
};

inline std::string to_string(NllReduction r) { return r == NllReduction::Sum ? "sum" : "mean"; }

inline NllReduction nll_reduction_from(const std::string &s) {
  if (s == "sum") return NllReduction::Sum;
  if (s == "mean") return NllReduction::Mean;
  throw ConfigError("config: nll must be \"sum\" or \"mean\", got \"" + s + "\"");
}

namespace detail {

inline std::int64_t seconds_to_us(double s, const char *what) {
  if (!(s > 0) || !std::isfinite(s)) throw ConfigError(std::string("config: ") + what + " must be a positive number");
  return static_cast<std::int64_t>(std::llround(s * 1e6));
}

} // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json &j) {
  PipelineConfig c;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (j.value("format", "netsentry.config") != "netsentry.config") throw ConfigError("config: wrong format tag");
  if (j.value("version", 1) != 1) throw ConfigError("config: unsupported version");
  static const std::vector<std::string> sections = {"format", "version", "seed",  "flow",
                                                    "sequence", "augment", "train", "evaluate"};
  for (const auto &[k, v] : j.items())
    if (std::find(sections.begin(), sections.end(), k) == sections.end())
      throw ConfigError("config: unknown key '" + k + "'");

  auto section = [&](const char *name, const std::vector<std::string> &keys,
                     const std::function<void(const std::string &, const nlohmann::json &)> &set) {
    if (!j.contains(name)) return;
    const auto &s = j.at(name);
    if (!s.is_object()) throw ConfigError(std::string("config: section '") + name + "' must be an object");
    for (const auto &[k, v] : s.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end())
        throw ConfigError(std::string("config: unknown key '") + name + "." + k + "'");
      set(k, v);
      c.explicit_keys.push_back(std::string(name) + "." + k);
    }
  };

  try {
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
      c.explicit_keys.push_back("seed");
    }
    section("flow", {"timeout_s", "activity_threshold_s", "subflow_gap_s"}, [&](const std::string &k, const auto &v) {
      const auto us = detail::seconds_to_us(v.template get<double>(), k.c_str());
      if (k == "timeout_s") c.flow.flow_timeout_us = us;
      else if (k == "activity_threshold_s") c.flow.activity_threshold_us = us;
      else c.flow.subflow_gap_us = us;
    });
    section("sequence", {"alpha", "tau_s"}, [&](const std::string &k, const auto &v) {
      if (k == "alpha") c.sequence.alpha = v.template get<std::size_t>();
      else c.sequence.tau_us = detail::seconds_to_us(v.template get<double>(), "tau_s");
    });
    section("augment", {"augbase_size", "noise_sd"}, [&](const std::string &k, const auto &v) {
      if (k == "augbase_size") c.augbase.size = v.template get<std::size_t>();
      else c.augment.noise_sd = v.template get<double>();
    });
    section("train", {"l2", "lr", "epochs", "batch_size", "nll"}, [&](const std::string &k, const auto &v) {
      if (k == "l2") c.train.l2 = v.template get<double>();
      else if (k == "lr") c.train.lr = v.template get<double>();
      else if (k == "epochs") c.train.epochs = v.template get<std::size_t>();
      else if (k == "batch_size") c.train.batch_size = v.template get<std::size_t>();
      else c.train.reduction = nll_reduction_from(v.template get<std::string>());
    });
    section("evaluate", {"threshold", "target_fpr"}, [&](const std::string &k, const auto &v) {
      if (k == "threshold") c.evaluate.threshold = v.template get<double>();
      else c.evaluate.target_fpr = v.template get<double>();
    });
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.sequence.alpha < 1) throw ConfigError("config: sequence.alpha must be >= 1");
  if (c.augment.noise_sd < 0) throw ConfigError("config: augment.noise_sd must be >= 0");
  try {
    c.train.validate();
  } catch (const PreconditionError &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline nlohmann::json to_json(const PipelineConfig &c) {
  auto s = [](std::int64_t us) { return static_cast<double>(us) / 1e6; };
  return {{"format", "netsentry.config"},
          {"version", 1},
          {"seed", c.seed},
          {"flow",
           {{"timeout_s", s(c.flow.flow_timeout_us)},
            {"activity_threshold_s", s(c.flow.activity_threshold_us)},
            {"subflow_gap_s", s(c.flow.subflow_gap_us)}}},
          {"sequence", {{"alpha", c.sequence.alpha}, {"tau_s", s(c.sequence.tau_us)}}},
          {"augment", {{"augbase_size", c.augbase.size}, {"noise_sd", c.augment.noise_sd}}},
          {"train",
           {{"l2", c.train.l2},
            {"lr", c.train.lr},
            {"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"nll", to_string(c.train.reduction)}}},
          {"evaluate", {{"threshold", c.evaluate.threshold}, {"target_fpr", c.evaluate.target_fpr}}}};
}

inline PipelineConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// Applies a flag value over the config. When the file also set `key` to a
// different value the flag wins and the conflict is logged.
template <class T>
void apply_override(PipelineConfig &c, const std::string &key, T &slot, const std::optional<T> &flag,
                    const std::function<void(const std::string &)> &log) {
  if (!flag) return;
  if (c.from_file(key) && !(slot == *flag) && log) {
    std::ostringstream os;
    os << "flag --" << key.substr(key.find('.') + 1) << " overrides config value for " << key;
    log(os.str());
  }
  slot = *flag;
}

// Environment overrides are limited to paths: NETSENTRY_CONFIG names the
// default config file, NETSENTRY_OUTPUT_DIR prefixes relative output paths.
inline std::optional<std::string> env_path(const char *name) {
  if (const char *v = std::getenv(name); v && *v) return std::string(v);
  return std::nullopt;
}

} // namespace netsentry
