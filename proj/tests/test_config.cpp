#include <gtest/gtest.h>

#include <cstdlib>

#include "support.hpp"

using namespace netsentry;
using testing_support::TempDir;

TEST(Config, DefaultsWhenEmpty) {
  const auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.flow.flow_timeout_us, 30'000'000);
  EXPECT_EQ(c.sequence.alpha, 10u);
  EXPECT_EQ(c.sequence.tau_us, 30'000'000);
  EXPECT_EQ(c.train.reduction, NllReduction::Sum);
  EXPECT_DOUBLE_EQ(c.evaluate.target_fpr, 0.015);
  EXPECT_TRUE(c.explicit_keys.empty());
}

TEST(Config, ParsesSectionsAndTracksExplicitKeys) {
  const auto j = nlohmann::json::parse(R"({
    "format": "netsentry.config", "version": 1, "seed": 9,
    "flow": {"timeout_s": 12.5},
    "sequence": {"alpha": 4, "tau_s": 0.5},
    "augment": {"augbase_size": 100, "noise_sd": 2},
    "train": {"l2": 0.1, "epochs": 3, "nll": "mean"},
    "evaluate": {"threshold": 0.7}
  })");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.flow.flow_timeout_us, 12'500'000);
  EXPECT_EQ(c.sequence.alpha, 4u);
  EXPECT_EQ(c.sequence.tau_us, 500'000);
  EXPECT_EQ(c.augbase.size, 100u);
  EXPECT_EQ(c.augment.noise_sd, 2.0);
  EXPECT_EQ(c.train.l2, 0.1);
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.train.reduction, NllReduction::Mean);
  EXPECT_EQ(c.evaluate.threshold, 0.7);
  EXPECT_TRUE(c.from_file("train.l2"));
  EXPECT_TRUE(c.from_file("seed"));
  EXPECT_FALSE(c.from_file("train.lr"));

  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  using nlohmann::json;
  EXPECT_THROW(config_from_json(json{{"seeds", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"train", {{"learning_rate", 0.1}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"train", {{"nll", "median"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"train", 3}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"flow", {{"timeout_s", -1}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"sequence", {{"alpha", 0}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"seed", "x"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"format", "other"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"version", 2}}), ConfigError);
  EXPECT_THROW(config_from_json(json::array()), ConfigError);
  EXPECT_EQ(nll_reduction_from("sum"), NllReduction::Sum);
  EXPECT_EQ(to_string(NllReduction::Mean), "mean");
}

TEST(Config, LoadFromFile) {
  TempDir dir("config");
  std::ofstream(dir.file("c.json")) << R"({"seed": 4, "sequence": {"alpha": 6}})";
  EXPECT_EQ(load_config(dir.file("c.json")).sequence.alpha, 6u);
  std::ofstream(dir.file("bad.json")) << "{ not json";
  EXPECT_THROW(load_config(dir.file("bad.json")), ConfigError);
  EXPECT_THROW(load_config(dir.file("missing.json")), ConfigError);
}

TEST(Config, FlagOverridesAreLoggedOnlyOnConflict) {
  auto c = config_from_json(nlohmann::json{{"train", {{"l2", 0.1}}}});
  std::vector<std::string> log;
  const auto sink = [&](const std::string &m) { log.push_back(m); };
  apply_override(c, "train.l2", c.train.l2, std::optional<double>(0.1), sink);
  EXPECT_TRUE(log.empty()); // same value
  apply_override(c, "train.l2", c.train.l2, std::optional<double>(0.3), sink);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_NE(log[0].find("--l2"), std::string::npos);
  EXPECT_NE(log[0].find("train.l2"), std::string::npos);
  EXPECT_EQ(c.train.l2, 0.3);
  apply_override(c, "train.lr", c.train.lr, std::optional<double>(0.01), sink);
  EXPECT_EQ(log.size(), 1u); // not set in the file
  EXPECT_EQ(c.train.lr, 0.01);
  apply_override(c, "train.lr", c.train.lr, std::optional<double>(), sink);
  EXPECT_EQ(c.train.lr, 0.01);
}

TEST(Config, EnvironmentPaths) {
  ::setenv("NETSENTRY_TEST_PATH", "/tmp/x", 1);
  EXPECT_EQ(env_path("NETSENTRY_TEST_PATH"), std::optional<std::string>("/tmp/x"));
  ::setenv("NETSENTRY_TEST_PATH", "", 1);
  EXPECT_FALSE(env_path("NETSENTRY_TEST_PATH").has_value());
  ::unsetenv("NETSENTRY_TEST_PATH");
  EXPECT_FALSE(env_path("NETSENTRY_TEST_PATH").has_value());
}
