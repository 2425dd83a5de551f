#pragma once

// Slow-down evasion: within each malicious flow the attacker's packets are
// delayed so their gap from the previous packet grows by a multiplier, while
// the victim keeps answering with its original latency.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "netsentry/dataset.hpp"
#include "netsentry/flow.hpp"
#include "netsentry/metrics.hpp"

namespace netsentry {

// `attacker[i]` marks packets sent by the attacker; packets in time order.
// Attacker gaps are scaled by m (integer microseconds, round to nearest);
// victim packets keep their original offset from the preceding attacker
// packet.
inline std::vector<std::int64_t> slow_down_times(std::span<const std::int64_t> times, const std::vector<bool> &attacker,
                                                 double m) {
  require(times.size() == attacker.size(), "slow_down: role vector length mismatch");
  require(m >= 1.0, "slow_down: multiplier must be >= 1");
  std::vector<std::int64_t> out(times.begin(), times.end());
  std::optional<std::size_t> last_attacker;
  if (!times.empty() && attacker[0]) last_attacker = 0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (attacker[i]) {
      const double gap = static_cast<double>(times[i] - times[i - 1]);
      out[i] = out[i - 1] + std::llround(gap * m);
      last_attacker = i;
    } else if (last_attacker) {
      out[i] = out[*last_attacker] + (times[i] - times[*last_attacker]);
    } else {
      out[i] = out[i - 1] + (times[i] - times[i - 1]);
    }
  }
  return out;
}

// Packet-level form: roles come from the attacker address set.
inline std::vector<PacketRecord> slow_down(std::vector<PacketRecord> flow, const std::set<IpAddress> &attackers,
                                           double m) {
  if (flow.empty()) return flow;
  std::vector<std::int64_t> times;
  std::vector<bool> role;
  bool any = false;
  for (const auto &p : flow) {
    times.push_back(p.timestamp_us);
    role.push_back(attackers.contains(p.src_ip));
    any = any || role.back();
  }
  if (!any) throw PreconditionError("slow_down: flow has no attacker packets");
  const auto t = slow_down_times(times, role, m);
  for (std::size_t i = 0; i < flow.size(); ++i) flow[i].timestamp_us = t[i];
  return flow;
}

struct EvasionResult {
  std::vector<PacketRecord> packets;
  std::vector<LabelRule> rules; // windows widened to cover stretched flows
  std::size_t altered_flows = 0;
};

// Applies slow_down to every flow matching a label rule and re-merges the
// stream in time order. Benign flows are untouched.
inline EvasionResult apply_evasion(const std::vector<PacketRecord> &packets, std::span<const LabelRule> rules, double m,
                                   const FlowConfig &cfg = {}) {
  EvasionResult res;
  res.rules.assign(rules.begin(), rules.end());
  if (m == 1.0) {
    res.packets = packets;
    return res;
  }
  for (auto flow : aggregate_flows(packets, cfg)) {
    auto pkts = flow.packets();
    FeatureVector probe;
    probe.src_ip = flow.key.src_ip;
    probe.dst_ip = flow.key.dst_ip;
    probe.start_us = flow.start_us;
    const LabelRule *rule = match_rule(probe, rules);
    if (rule) {
      if (!rule->attacker_ips.contains(flow.key.src_ip))
        throw PreconditionError("apply_evasion: malicious flow not initiated by its attacker: " +
                                make_flow_id(flow.key, flow.start_us));
      pkts = slow_down(std::move(pkts), rule->attacker_ips, m);
      auto &r = res.rules[static_cast<std::size_t>(rule - rules.data())];
      r.end_us = std::max(r.end_us, pkts.back().timestamp_us + 1);
      ++res.altered_flows;
    }
    std::move(pkts.begin(), pkts.end(), std::back_inserter(res.packets));
  }
  std::stable_sort(res.packets.begin(), res.packets.end(), [](const PacketRecord &a, const PacketRecord &b) {
    return std::tie(a.timestamp_us, a.ordinal) < std::tie(b.timestamp_us, b.ordinal);
  });
  for (std::size_t i = 0; i < res.packets.size(); ++i) res.packets[i].ordinal = i;
  return res;
}

struct PeMatrix {
  std::vector<double> multipliers;
  std::vector<std::vector<double>> f1;                 // [train][test]
  std::vector<std::vector<std::optional<double>>> pe;  // nullopt = invalid cell
};

// Trains one model per variant through `train_fn` and scores it on every
// variant through `f1_fn(model, train_index, test_index)`. A failing cell is
// recorded as invalid.
template <class Model>
PeMatrix robustness_matrix(std::span<const double> multipliers, const std::function<Model(std::size_t)> &train_fn,
                           const std::function<double(Model &, std::size_t, std::size_t)> &f1_fn) {
  const std::size_t n = multipliers.size();
  PeMatrix pm;
  pm.multipliers.assign(multipliers.begin(), multipliers.end());
  pm.f1.assign(n, std::vector<double>(n, 0.0));
  pm.pe.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<Model> model;
    try {
      model.emplace(train_fn(i));
    } catch (const Error &) {
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      try {
        pm.f1[i][j] = f1_fn(*model, i, j);
      } catch (const Error &) {
        pm.f1[i][j] = std::nan("");
      }
    }
    for (std::size_t j = 0; j < n; ++j)
      if (std::isfinite(pm.f1[i][j]) && std::isfinite(pm.f1[i][i]))
        pm.pe[i][j] = i == j ? std::optional<double>(0.0) : percentage_error_f1(pm.f1[i][j], pm.f1[i][i]);
  }
  return pm;
}

} // namespace netsentry
