#include <gtest/gtest.h>

#include "support.hpp"

using namespace netsentry;
using testing_support::flow_at;
using testing_support::TempDir;

namespace {

LabelRule rule(const std::string &name, std::vector<std::string> attackers, std::vector<std::string> victims,
               std::int64_t start, std::int64_t end) {
  LabelRule r;
  r.attack_name = name;
  for (const auto &a : attackers) r.attacker_ips.insert(IpAddress::parse(a));
  for (const auto &v : victims) r.victim_ips.insert(IpAddress::parse(v));
  r.start_us = start;
  r.end_us = end;
  return r;
}

} // namespace

TEST(Labels, RuleMatchesEitherDirectionInsideWindow) {
  const auto r = rule("dos_hulk", {"172.16.0.1"}, {"192.168.10.50"}, 1000, 2000);
  EXPECT_TRUE(r.matches(flow_at("172.16.0.1", "192.168.10.50", 1000)));
  EXPECT_TRUE(r.matches(flow_at("192.168.10.50", "172.16.0.1", 1999)));
  EXPECT_FALSE(r.matches(flow_at("172.16.0.1", "192.168.10.50", 2000))); // end is exclusive
  EXPECT_FALSE(r.matches(flow_at("172.16.0.1", "192.168.10.50", 999)));
  EXPECT_FALSE(r.matches(flow_at("172.16.0.1", "192.168.10.51", 1500)));
  EXPECT_FALSE(r.matches(flow_at("172.16.0.2", "192.168.10.50", 1500)));
}

TEST(Labels, EmptyVictimSetMatchesAnyPeer) {
  const auto r = rule("portscan", {"172.16.0.1"}, {}, 0, 100);
  EXPECT_TRUE(r.matches(flow_at("172.16.0.1", "10.9.9.9", 5)));
  EXPECT_TRUE(r.matches(flow_at("8.8.8.8", "172.16.0.1", 5)));
}

TEST(Labels, AssignLabelsAndRejectConflicts) {
  std::vector<FeatureVector> flows = {flow_at("172.16.0.1", "192.168.10.50", 10), flow_at("10.0.0.1", "10.0.0.2", 10)};
  std::vector<LabelRule> rules = {rule("dos_hulk", {"172.16.0.1"}, {}, 0, 100)};
  assign_labels(flows, rules);
  EXPECT_EQ(flows[0].label, "dos_hulk");
  EXPECT_EQ(flows[1].label, "benign");

  // two rules with the same name may overlap; different names may not
  rules.push_back(rule("dos_hulk", {"172.16.0.1"}, {"192.168.10.50"}, 0, 50));
  EXPECT_NO_THROW(assign_labels(flows, rules));
  rules.push_back(rule("portscan", {"172.16.0.1"}, {}, 5, 15));
  EXPECT_THROW(assign_labels(flows, rules), ConfigError);
}

TEST(Labels, InvalidRulesAreConfigErrors) {
  EXPECT_THROW(validate(rule("x", {"1.1.1.1"}, {}, 5, 5)), ConfigError);
  EXPECT_THROW(validate(rule("x", {}, {}, 0, 5)), ConfigError);
  EXPECT_THROW(validate(rule("", {"1.1.1.1"}, {}, 0, 5)), ConfigError);
}

TEST(Labels, RulesFileRoundTrip) {
  TempDir dir("rules");
  std::vector<LabelRule> rules = {rule("dos_hulk", {"172.16.0.1", "172.16.0.2"}, {"192.168.10.50"}, 0, 100),
                                  rule("ssh_bruteforce", {"2001:db8::7"}, {}, 100, 200)};
  save_rules(dir.file("r.json"), rules);
  const auto back = load_rules(dir.file("r.json"));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].attack_name, rules[i].attack_name);
    EXPECT_EQ(back[i].attacker_ips, rules[i].attacker_ips);
    EXPECT_EQ(back[i].victim_ips, rules[i].victim_ips);
    EXPECT_EQ(back[i].start_us, rules[i].start_us);
    EXPECT_EQ(back[i].end_us, rules[i].end_us);
  }
  EXPECT_THROW(rules_from_json(nlohmann::json{{"rules", {{{"attack", "x"}}}}}), FormatError);
}

TEST(LabelMapping, KnownNamesMapToFiveClasses) {
  EXPECT_EQ(abstractify("benign"), AbstractLabel::BENIGN);
  EXPECT_EQ(abstractify("dos_hulk"), AbstractLabel::DOS);
  EXPECT_EQ(abstractify("dos_slowloris"), AbstractLabel::DOS);
  EXPECT_EQ(abstractify("ddos_loic_udp"), AbstractLabel::DOS);
  EXPECT_EQ(abstractify("portscan"), AbstractLabel::PORTSCAN);
  EXPECT_EQ(abstractify("ssh_bruteforce"), AbstractLabel::BRUTEFORCE_FUZZ);
  EXPECT_EQ(abstractify("sql_injection"), AbstractLabel::BRUTEFORCE_FUZZ);
  EXPECT_EQ(abstractify("botnet"), AbstractLabel::OTHER_MALICIOUS);
  EXPECT_EQ(abstractify("DOS"), AbstractLabel::DOS);
  EXPECT_EQ(to_string(AbstractLabel::BRUTEFORCE_FUZZ), "BRUTEFORCE_FUZZ");
}

TEST(LabelMapping, UnknownNameThrowsAndCustomEntriesWork) {
  EXPECT_THROW(abstractify("martian_attack"), ConfigError);
  LabelMap m;
  m.add("martian_attack", AbstractLabel::OTHER_MALICIOUS);
  EXPECT_EQ(m("martian_attack"), AbstractLabel::OTHER_MALICIOUS);
  for (const auto &[name, cls] : m.entries()) EXPECT_LT(static_cast<std::size_t>(cls), kNumClasses) << name;
}

TEST(LabelMapping, AugmentableSetIsSingleRequestFloodsOnly) {
  EXPECT_TRUE(is_augmentable_label("dos_hulk"));
  EXPECT_TRUE(is_augmentable_label("dos_goldeneye"));
  EXPECT_FALSE(is_augmentable_label("dos_slowloris"));
  EXPECT_FALSE(is_augmentable_label("benign"));
  EXPECT_FALSE(is_augmentable_label("portscan"));
}

TEST(Normalizer, MapsTrainingRangeOntoUnitIntervalAndClampsOutside) {
  std::vector<FeatureVector> flows;
  for (int i = 0; i < 5; ++i) {
    auto f = flow_at("10.0.0.1", "10.0.0.2", i, 2.0 * i);
    f.stats[feat::FwdBlock] = 10.0 + i;
    flows.push_back(f);
  }
  const auto spec = fit_normalizer(std::span<const FeatureVector>(flows));
  EXPECT_EQ(spec.min[feat::Duration], 0);
  EXPECT_EQ(spec.max[feat::Duration], 8);
  const auto rows = apply_normalizer(spec, flows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_DOUBLE_EQ(rows[i][feat::Duration], i / 4.0);
    EXPECT_DOUBLE_EQ(rows[i][feat::FwdBlock], i / 4.0);
    EXPECT_EQ(rows[i][feat::Idle], 0); // constant column maps to zero
    for (double v : rows[i]) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(spec.apply(feat::Duration, 100.0), 1.0);
  EXPECT_EQ(spec.apply(feat::Duration, -3.0), 0.0);
  EXPECT_DOUBLE_EQ(spec.invert(feat::Duration, 0.5), 4.0);
  EXPECT_EQ(normalizer_from_json(to_json(spec)), spec);
  EXPECT_THROW(normalizer_from_json(nlohmann::json{{"min", {1}}, {"max", {2}}}), FormatError);
}

TEST(TimeSplit, TrainingStartsStrictlyBeforeTest) {
  std::vector<FeatureVector> flows;
  for (int i = 0; i < 100; ++i) flows.push_back(flow_at("10.0.0.1", "10.0.0.2", (i * 37) % 100 * 1000));
  const auto [train, test] = time_split(flows, 0.7);
  EXPECT_EQ(train.size(), 70u);
  EXPECT_EQ(test.size(), 30u);
  std::int64_t latest_train = 0, earliest_test = INT64_MAX;
  for (const auto &f : train) latest_train = std::max(latest_train, f.start_us);
  for (const auto &f : test) earliest_test = std::min(earliest_test, f.start_us);
  EXPECT_LT(latest_train, earliest_test);
}

TEST(TimeSplit, TiedTimestampsStayOnOneSide) {
  std::vector<FeatureVector> flows;
  for (int i = 0; i < 10; ++i) flows.push_back(flow_at("10.0.0.1", "10.0.0.2", i < 5 ? 0 : 1000));
  const auto [train, test] = time_split(flows, 0.7);
  EXPECT_EQ(train.size(), 5u);
  EXPECT_EQ(test.size(), 5u);
  std::vector<FeatureVector> same(4, flow_at("10.0.0.1", "10.0.0.2", 7));
  EXPECT_THROW(time_split(same, 0.5), PreconditionError);
  EXPECT_THROW(time_split(flows, 1.0), PreconditionError);
}

TEST(Encoding, PaddingRowsAreZeroWithNegativeTarget) {
  std::vector<FeatureVector> flows = {flow_at("10.0.0.1", "10.0.0.2", 0, 1.0, 1, "dos_hulk"),
                                      flow_at("10.0.0.1", "10.0.0.2", 5, 3.0, 2, "benign")};
  const auto seqs = build_sequences(flows, {4, 30'000'000});
  ASSERT_EQ(seqs.size(), 1u);
  const auto norm = fit_normalizer(std::span<const FlowSequence>(seqs));
  const auto t = encode(seqs[0], norm);
  EXPECT_EQ(t.alpha, 4u);
  EXPECT_EQ(t.dim, kModelFeatures);
  EXPECT_EQ(t.y, (std::vector<int>{1, 0, -1, -1}));
  EXPECT_EQ(t.real_count(), 2u);
  EXPECT_EQ(t.row(0)[feat::Duration], 0.0);
  EXPECT_EQ(t.row(1)[feat::Duration], 1.0);
  EXPECT_EQ(t.row(0)[62], 0.0); // one-hot column is constant in the fit set
  for (std::size_t t2 = 2; t2 < 4; ++t2)
    for (double v : t.row(t2)) EXPECT_EQ(v, 0.0);
}
