#pragma once

// Detection metrics: binarized precision/recall/F1, confusion matrices, ROC,
// per-type ECDFs of anomaly scores, compute cost and the cross-test
// percentage error.

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netsentry/bialstm.hpp"
#include "netsentry/dataset.hpp"
#include "netsentry/error.hpp"

namespace netsentry {

struct BinaryMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  // set when a ratio had a zero denominator and was reported as 0
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
};

inline BinaryMetrics binary_metrics(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  BinaryMetrics m{tp, fp, tn, fn};
  if (tp + fp == 0) m.precision_undefined = true;
  else m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn == 0) m.recall_undefined = true;
  else m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall == 0) m.f1_undefined = true;
  else m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// Positive = malicious.
inline BinaryMetrics compute_metrics(const std::vector<bool> &predicted, const std::vector<bool> &truth) {
  require(predicted.size() == truth.size(), "compute_metrics: length mismatch");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i]) (truth[i] ? tp : fp)++;
    else (truth[i] ? fn : tn)++;
  }
  return binary_metrics(tp, fp, tn, fn);
}

// Class-level overload: any non-BENIGN class counts as positive.
inline BinaryMetrics compute_metrics(std::span<const AbstractLabel> predicted, std::span<const AbstractLabel> truth) {
  require(predicted.size() == truth.size(), "compute_metrics: length mismatch");
  std::vector<bool> p, t;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    p.push_back(predicted[i] != AbstractLabel::BENIGN);
    t.push_back(truth[i] != AbstractLabel::BENIGN);
  }
  return compute_metrics(p, t);
}

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>; // [truth][predicted]

inline Confusion confusion_matrix(std::span<const AbstractLabel> predicted, std::span<const AbstractLabel> truth) {
  require(predicted.size() == truth.size(), "confusion_matrix: length mismatch");
  Confusion c{};
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++c[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  return c;
}

// Rows sum to 1; empty rows stay all-zero.
inline std::array<std::array<double, kNumClasses>, kNumClasses> normalize_rows(const Confusion &c) {
  std::array<std::array<double, kNumClasses>, kNumClasses> n{};
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    std::size_t total = 0;
    for (auto v : c[r]) total += v;
    if (total == 0) continue;
    for (std::size_t k = 0; k < kNumClasses; ++k) n[r][k] = static_cast<double>(c[r][k]) / static_cast<double>(total);
  }
  return n;
}

// Recall per truth class; nullopt for classes absent from the truth.
inline std::array<std::optional<double>, kNumClasses> per_class_recall(const Confusion &c) {
  std::array<std::optional<double>, kNumClasses> r{};
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::size_t total = 0;
    for (auto v : c[k]) total += v;
    if (total) r[k] = static_cast<double>(c[k][k]) / static_cast<double>(total);
  }
  return r;
}

// ---- ROC -------------------------------------------------------------------------

struct RocPoint {
  double threshold, fpr, tpr;
};

struct RocCurve {
  std::vector<RocPoint> points; // fpr non-decreasing, from (0,0) to (1,1)
  double auc = 0;
  bool undefined = false; // truth holds a single class
};

// Sweeps every unique score as a threshold (positive iff score >= t) and
// integrates with the trapezoid rule.
inline RocCurve roc_curve(std::span<const double> scores, const std::vector<bool> &truth) {
  require(scores.size() == truth.size(), "roc_curve: length mismatch");
  RocCurve roc;
  std::size_t pos = 0;
  for (bool t : truth) pos += t;
  const std::size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0) {
    roc.undefined = true;
    return roc;
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = scores[idx[i]];
    for (; i < idx.size() && scores[idx[i]] == s; ++i) (truth[idx[i]] ? tp : fp)++;
    roc.points.push_back(
        {s, static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
  }
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto &a = roc.points[i - 1], &b = roc.points[i];
    roc.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2;
  }
  return roc;
}

// ---- ECDF ---------------------------------------------------------------------------

struct EcdfPoint {
  double score, cdf;
};

inline std::vector<EcdfPoint> ecdf(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  std::vector<EcdfPoint> out;
  const double n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i + 1 == scores.size() || scores[i + 1] != scores[i]) out.push_back({scores[i], static_cast<double>(i + 1) / n});
  return out;
}

// Smallest threshold whose benign false-positive rate (score >= threshold)
// stays within `target_fpr`. Ties at the top may force a stricter threshold;
// then the nearest achievable rate is reported.
inline double threshold_for_fpr(std::vector<double> benign, double target_fpr) {
  require(!benign.empty(), "threshold_for_fpr: no benign scores");
  require(target_fpr >= 0 && target_fpr <= 1, "threshold_for_fpr: target must be in [0, 1]");
  std::sort(benign.begin(), benign.end());
  const double n = static_cast<double>(benign.size());
  const auto allowed = static_cast<std::size_t>(std::floor(target_fpr * n + 1e-9));
  // candidate thresholds are the unique benign scores, ascending
  for (std::size_t i = 0; i < benign.size(); ++i) {
    if (i > 0 && benign[i] == benign[i - 1]) continue;
    if (benign.size() - i <= allowed) return benign[i];
  }
  return std::nextafter(benign.back(), std::numeric_limits<double>::infinity());
}

struct TypeEcdf {
  std::string type;
  std::size_t count = 0;
  std::vector<EcdfPoint> table;
  double below_threshold = 0; // FNR for attacks, 1 - FPR for benign
};

struct EcdfReport {
  double target_fpr = 0.015;
  double threshold = 0;
  double achieved_fpr = 0;
  std::vector<TypeEcdf> types;
};

inline EcdfReport ecdf_by_type(std::span<const double> scores, std::span<const std::string> labels,
                               double target_fpr = 0.015) {
  require(scores.size() == labels.size(), "ecdf_by_type: length mismatch");
  std::map<std::string, std::vector<double>> by;
  for (std::size_t i = 0; i < scores.size(); ++i) by[labels[i]].push_back(scores[i]);
  if (!by.contains("benign")) throw PreconditionError("ecdf_by_type: no benign scores");
  EcdfReport r;
  r.target_fpr = target_fpr;
  r.threshold = threshold_for_fpr(by["benign"], target_fpr);
  for (auto &[type, v] : by) {
    TypeEcdf t;
    t.type = type;
    t.count = v.size();
    std::size_t below = 0;
    for (double s : v) below += s < r.threshold;
    t.below_threshold = static_cast<double>(below) / static_cast<double>(v.size());
    if (type == "benign") r.achieved_fpr = static_cast<double>(v.size() - below) / static_cast<double>(v.size());
    t.table = ecdf(std::move(v));
    r.types.push_back(std::move(t));
  }
  return r;
}

// ---- compute cost --------------------------------------------------------------------

struct CostReport {
  std::size_t lstm_macs = 0, conv_macs = 0, fusion_macs = 0, head_macs = 0;
  std::size_t parameters = 0;
  std::size_t macs() const { return lstm_macs + conv_macs + fusion_macs + head_macs; }
  static constexpr const char *convention =
      "one multiply-add = 1 MAC per flow (timestep); dense LSTM layer 4*h*(d+h); ConvLSTM layer "
      "4*L*k*(c_in*c_out + c_out*c_out) over input and hidden paths; fusion N*(N1+N2); head N*C; "
      "nonlinearities, pooling, normalization and bias adds uncounted; parameters include biases";
};

inline CostReport count_macs(const BiALSTMConfig &cfg) {
  CostReport r;
  std::size_t d = cfg.input_dim;
  for (auto h : cfg.lstm_hidden) {
    r.lstm_macs += 4 * h * (d + h);
    r.parameters += 4 * h * (d + h) + 4 * h;
    d = h;
  }
  std::size_t cin = 1;
  for (std::size_t l = 0; l < cfg.conv_channels.size(); ++l) {
    const std::size_t c = cfg.conv_channels[l], L = cfg.conv_length(l);
    r.conv_macs += 4 * L * cfg.kernel * (cin * c + c * c);
    r.parameters += 4 * cfg.kernel * (cin * c + c * c) + 4 * c;
    cin = c;
  }
  r.fusion_macs = cfg.fusion_dim * (cfg.lstm_out() + cfg.conv_out());
  r.head_macs = cfg.fusion_dim * cfg.classes;
  r.parameters += r.fusion_macs + r.head_macs + cfg.classes;
  return r;
}

// PE = (F1_ij - F1_ii) / F1_ii * 100; nullopt when the baseline is zero.
inline std::optional<double> percentage_error_f1(double f1_ij, double f1_ii) {
  if (!(f1_ii > 0)) return std::nullopt;
  return (f1_ij - f1_ii) / f1_ii * 100.0;
}

// ---- report ---------------------------------------------------------------------------

struct EvaluationReport {
  BinaryMetrics binary;
  Confusion confusion{};
  std::array<std::optional<double>, kNumClasses> recall_per_class{};
  RocCurve roc;
  std::optional<EcdfReport> ecdf;
  double threshold = 0.5;
  CostReport cost;
  std::size_t flows = 0;
};

// Scores every real timestep of `data` and assembles the report. `specific`
// holds the original attack names in the same order as the real rows, for the
// per-type ECDF.
inline EvaluationReport evaluate(BiALSTM &model, std::span<const SequenceTensor> data, double threshold = 0.5,
                                 std::span<const std::string> specific = {}, double target_fpr = 0.015) {
  const auto preds = predict(model, data, threshold);
  std::vector<AbstractLabel> truth, guess;
  std::vector<bool> truth_bin, pred_bin;
  std::vector<double> scores;
  for (const auto &p : preds) {
    const auto y = static_cast<AbstractLabel>(data[p.sequence].y[p.timestep]);
    truth.push_back(y);
    guess.push_back(static_cast<AbstractLabel>(p.cls));
    truth_bin.push_back(y != AbstractLabel::BENIGN);
    pred_bin.push_back(p.malicious);
    scores.push_back(p.anomaly);
  }
  EvaluationReport r;
  r.binary = compute_metrics(pred_bin, truth_bin);
  r.confusion = confusion_matrix(guess, truth);
  r.recall_per_class = per_class_recall(r.confusion);
  r.roc = roc_curve(scores, truth_bin);
  if (!specific.empty()) {
    require(specific.size() == scores.size(), "evaluate: specific labels do not match the real rows");
    bool has_benign = std::find(specific.begin(), specific.end(), "benign") != specific.end();
    if (has_benign) r.ecdf = ecdf_by_type(scores, specific, target_fpr);
  }
  r.threshold = threshold;
  r.cost = count_macs(model.config());
  r.cost.parameters = model.parameter_count();
  r.flows = preds.size();
  return r;
}

inline nlohmann::json to_json(const EvaluationReport &r) {
  nlohmann::json j;
  j["format"] = "netsentry.report";
  j["version"] = 1;
  j["flows"] = r.flows;
  j["threshold"] = r.threshold;
  j["precision"] = r.binary.precision;
  j["recall"] = r.binary.recall;
  j["f1"] = r.binary.f1;
  j["counts"] = {{"tp", r.binary.tp}, {"fp", r.binary.fp}, {"tn", r.binary.tn}, {"fn", r.binary.fn}};
  j["undefined"] = {{"precision", r.binary.precision_undefined},
                    {"recall", r.binary.recall_undefined},
                    {"f1", r.binary.f1_undefined}};
  j["classes"] = abstract_label_names();
  j["confusion"] = r.confusion;
  j["confusion_normalized"] = normalize_rows(r.confusion);
  nlohmann::json rec = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumClasses; ++k)
    rec[abstract_label_names()[k]] = r.recall_per_class[k] ? nlohmann::json(*r.recall_per_class[k]) : nlohmann::json();
  j["recall_per_class"] = rec;
  j["auc"] = r.roc.undefined ? nlohmann::json() : nlohmann::json(r.roc.auc);
  if (r.ecdf) {
    nlohmann::json e;
    e["target_fpr"] = r.ecdf->target_fpr;
    e["threshold"] = r.ecdf->threshold;
    e["achieved_fpr"] = r.ecdf->achieved_fpr;
    for (const auto &t : r.ecdf->types) e["below_threshold"][t.type] = t.below_threshold;
    j["ecdf"] = e;
  }
  j["cost"] = {{"macs", r.cost.macs()},       {"lstm_macs", r.cost.lstm_macs},   {"conv_macs", r.cost.conv_macs},
               {"fusion_macs", r.cost.fusion_macs}, {"head_macs", r.cost.head_macs}, {"parameters", r.cost.parameters},
               {"convention", CostReport::convention}};
  return j;
}

inline std::string roc_csv(const RocCurve &roc) {
  std::ostringstream os;
  os << "threshold,fpr,tpr\n" << std::setprecision(17);
  for (const auto &p : roc.points) os << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  return os.str();
}

inline std::string ecdf_csv(const EcdfReport &e) {
  std::ostringstream os;
  os << "type,score,cdf\n" << std::setprecision(17);
  for (const auto &t : e.types)
    for (const auto &p : t.table) os << t.type << ',' << p.score << ',' << p.cdf << '\n';
  return os.str();
}

inline std::string to_text(const EvaluationReport &r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "flows " << r.flows << "  threshold " << r.threshold << '\n';
  os << "precision " << r.binary.precision << "  recall " << r.binary.recall << "  f1 " << r.binary.f1 << '\n';
  if (!r.roc.undefined) os << "auc " << r.roc.auc << '\n';
  os << "\nconfusion (rows = truth, normalized)\n" << std::setw(17) << "";
  for (const auto &n : abstract_label_names()) os << std::setw(17) << n;
  os << '\n';
  const auto norm = normalize_rows(r.confusion);
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    os << std::setw(17) << abstract_label_names()[a];
    for (std::size_t b = 0; b < kNumClasses; ++b) os << std::setw(17) << norm[a][b];
    os << '\n';
  }
  if (r.ecdf) {
    os << "\nthreshold at FPR target " << r.ecdf->target_fpr << ": " << r.ecdf->threshold << " (achieved "
       << r.ecdf->achieved_fpr << ")\n";
    for (const auto &t : r.ecdf->types)
      os << "  " << std::setw(20) << std::left << t.type << std::right << " n=" << std::setw(7) << t.count
         << "  below threshold " << t.below_threshold << '\n';
  }
  os << "\nMACs " << r.cost.macs() << "  parameters " << r.cost.parameters << '\n';
  os << "  (" << CostReport::convention << ")\n";
  return os.str();
}

} // namespace netsentry
