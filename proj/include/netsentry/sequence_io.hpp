#pragma once

// Sequence files: JSON lines, one header object then one sequence per line.
// Padding rows are stored as null.

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netsentry/sequence.hpp"

namespace netsentry {

inline nlohmann::json to_json(const FeatureVector &f) {
  return {{"flow_id", f.flow_id},   {"src_ip", f.src_ip.to_string()}, {"dst_ip", f.dst_ip.to_string()},
          {"src_port", f.src_port}, {"dst_port", f.dst_port},         {"start_us", f.start_us},
          {"stats", f.stats},       {"label", f.label}};
}

inline FeatureVector feature_vector_from_json(const nlohmann::json &j) {
  FeatureVector f;
  f.flow_id = j.at("flow_id");
  f.src_ip = IpAddress::parse(j.at("src_ip").get<std::string>());
  f.dst_ip = IpAddress::parse(j.at("dst_ip").get<std::string>());
  f.src_port = j.at("src_port");
  f.dst_port = j.at("dst_port");
  f.start_us = j.at("start_us");
  const auto s = j.at("stats").get<std::vector<double>>();
  if (s.size() != kStatFeatures) throw FormatError("sequence file: expected 63 stats per flow");
  std::copy(s.begin(), s.end(), f.stats.begin());
  f.label = j.at("label");
  return f;
}

inline nlohmann::json to_json(const FlowSequence &s) {
  nlohmann::json flows = nlohmann::json::array();
  for (std::size_t t = 0; t < s.alpha(); ++t) flows.push_back(s.pad_mask[t] ? to_json(s.flows[t]) : nlohmann::json());
  return {{"src_ip", s.key.src_ip.to_string()},
          {"dst_ip", s.key.dst_ip.to_string()},
          {"protocol", std::string(protocol_name(s.key.protocol))},
          {"emitted_at_us", s.emitted_at_us},
          {"flows", flows}};
}

inline FlowSequence flow_sequence_from_json(const nlohmann::json &j) {
  FlowSequence s;
  s.key.src_ip = IpAddress::parse(j.at("src_ip").get<std::string>());
  s.key.dst_ip = IpAddress::parse(j.at("dst_ip").get<std::string>());
  const auto proto = j.at("protocol").get<std::string>();
  s.key.protocol = proto == "TCP" ? Protocol::TCP : proto == "UDP" ? Protocol::UDP : Protocol::OTHER;
  s.emitted_at_us = j.at("emitted_at_us");
  for (const auto &row : j.at("flows")) {
    if (row.is_null()) {
      s.flows.push_back(padding_row());
      s.labels.emplace_back();
      s.pad_mask.push_back(false);
    } else {
      s.flows.push_back(feature_vector_from_json(row));
      s.labels.push_back(s.flows.back().label);
      s.pad_mask.push_back(true);
    }
  }
  return s;
}

inline void write_sequences(const std::string &path, std::span<const FlowSequence> seqs, const nlohmann::json &meta = {}) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write sequences: " + path);
  nlohmann::json head = {{"format", "netsentry.sequences"}, {"version", 1}, {"count", seqs.size()}};
  if (!meta.is_null()) head["meta"] = meta;
  out << head.dump() << '\n';
  for (const auto &s : seqs) out << to_json(s).dump() << '\n';
}

inline std::vector<FlowSequence> read_sequences(const std::string &path, nlohmann::json *meta = nullptr) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open sequences: " + path);
  std::vector<FlowSequence> out;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (!header) {
        if (j.value("format", "") != "netsentry.sequences") throw FormatError(path + ": not a sequence file");
        if (meta && j.contains("meta")) *meta = j["meta"];
        header = true;
        continue;
      }
      out.push_back(flow_sequence_from_json(j));
    }
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
  }
  if (!header) throw FormatError(path + ": empty sequence file");
  return out;
}

} // namespace netsentry
