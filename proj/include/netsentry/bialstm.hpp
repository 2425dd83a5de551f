#pragma once

// Bi-ALSTM: a dense LSTM unit reading the sequence forward, a 1-D ConvLSTM
// unit reading it backward with each flow treated as a 1-channel signal, and
// a fusion step tanh(Ua/|Ua| + Ub/|Ub|) feeding a softmax head per timestep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netsentry/dataset.hpp"
#include "netsentry/nn/cells.hpp"
#include "netsentry/nn/optim.hpp"
#include "netsentry/nn/tape.hpp"
#include "netsentry/rng.hpp"
#include "netsentry/sequence.hpp"

namespace netsentry {

struct BiALSTMConfig {
  std::size_t input_dim = kModelFeatures;
  std::vector<std::size_t> lstm_hidden = {48, 48};
  std::vector<std::size_t> conv_channels = {3, 6};
  std::size_t kernel = 3;
  // Pool after every ConvLSTM layer (true) or only after the last one.
  bool pool_between_layers = true;
  std::size_t fusion_dim = 32;
  std::size_t classes = kNumClasses;
  double input_dropout = 0.5;
  double head_dropout = 0.3;
  double eps = 1e-12;

  // Signal length seen by ConvLSTM layer `l`.
  std::size_t conv_length(std::size_t l) const {
    std::size_t L = input_dim;
    for (std::size_t i = 0; i < l && pool_between_layers; ++i) L /= 2;
    return L;
  }
  std::size_t lstm_out() const { return lstm_hidden.back(); }
  std::size_t conv_out() const { return conv_channels.back() * (conv_length(conv_channels.size() - 1) / 2); }

  void validate() const {
    require(input_dim >= 2 && !lstm_hidden.empty() && !conv_channels.empty(), "bialstm: empty architecture");
    require(kernel % 2 == 1, "bialstm: kernel size must be odd");
    require(conv_length(conv_channels.size() - 1) >= 2, "bialstm: input too short for the pooling chain");
    require(fusion_dim >= 1 && classes >= 2, "bialstm: bad head dimensions");
  }

  bool operator==(const BiALSTMConfig &) const = default;
};

inline nlohmann::json to_json(const BiALSTMConfig &c) {
  return {{"input_dim", c.input_dim},         {"lstm_hidden", c.lstm_hidden},
          {"conv_channels", c.conv_channels}, {"kernel", c.kernel},
          {"pool_between_layers", c.pool_between_layers},
          {"fusion_dim", c.fusion_dim},       {"classes", c.classes},
          {"input_dropout", c.input_dropout}, {"head_dropout", c.head_dropout},
          {"eps", c.eps}};
}

inline BiALSTMConfig bialstm_config_from_json(const nlohmann::json &j) {
  BiALSTMConfig c;
  c.input_dim = j.at("input_dim");
  c.lstm_hidden = j.at("lstm_hidden").get<std::vector<std::size_t>>();
  c.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
  c.kernel = j.at("kernel");
  c.pool_between_layers = j.at("pool_between_layers");
  c.fusion_dim = j.at("fusion_dim");
  c.classes = j.at("classes");
  c.input_dropout = j.at("input_dropout");
  c.head_dropout = j.at("head_dropout");
  c.eps = j.at("eps");
  return c;
}

// One sequence as the model sees it: alpha x dim row-major inputs, a mask of
// real rows and per-row class targets (-1 on padding).
struct SequenceTensor {
  std::size_t alpha = 0, dim = 0;
  std::vector<double> x;
  std::vector<bool> mask;
  std::vector<int> y;

  std::span<const double> row(std::size_t t) const { return {x.data() + t * dim, dim}; }
  std::size_t real_count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }
};

inline SequenceTensor encode(const FlowSequence &s, const NormalizationSpec &norm, const LabelMap &labels = {}) {
  SequenceTensor out;
  out.alpha = s.alpha();
  out.dim = kModelFeatures;
  out.x.assign(out.alpha * out.dim, 0.0);
  out.mask = s.pad_mask;
  out.y.assign(out.alpha, -1);
  for (std::size_t t = 0; t < out.alpha; ++t) {
    if (!s.pad_mask[t]) continue;
    const auto row = norm.apply(s.flows[t].model_input());
    std::copy(row.begin(), row.end(), out.x.begin() + static_cast<std::ptrdiff_t>(t * out.dim));
    out.y[t] = static_cast<int>(labels(s.labels[t]));
  }
  return out;
}

inline std::vector<SequenceTensor> encode_all(std::span<const FlowSequence> seqs, const NormalizationSpec &norm,
                                              const LabelMap &labels = {}) {
  std::vector<SequenceTensor> out;
  out.reserve(seqs.size());
  for (const auto &s : seqs) out.push_back(encode(s, norm, labels));
  return out;
}

// Fits the normalizer on the real rows of a set of sequences.
inline NormalizationSpec fit_normalizer(std::span<const FlowSequence> seqs) {
  std::vector<std::array<double, kModelFeatures>> rows;
  for (const auto &s : seqs)
    for (std::size_t t = 0; t < s.alpha(); ++t)
      if (s.pad_mask[t]) rows.push_back(s.flows[t].model_input());
  return fit_normalizer(std::span<const std::array<double, kModelFeatures>>(rows));
}

// How the per-timestep NLL terms of a batch are combined before the penalty
// is added.
enum class NllReduction { Mean, Sum };

struct TrainConfig {
  double l2 = 0.5;
  NllReduction reduction = NllReduction::Sum;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const {
    require(l2 >= 0.0, "train: l2 weight must be >= 0");
    require(lr > 0.0, "train: learning rate must be > 0");
    require(batch_size >= 1, "train: batch size must be >= 1");
  }
};

struct FlowPrediction {
  std::size_t sequence = 0, timestep = 0;
  std::vector<double> probs;
  std::size_t cls = 0;
  double anomaly = 0.0; // 1 - P(BENIGN)
  bool malicious = false;
};

class BiALSTM {
public:
  explicit BiALSTM(BiALSTMConfig cfg = {}) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::size_t d = cfg_.input_dim;
    for (std::size_t l = 0; l < cfg_.lstm_hidden.size(); ++l) {
      lstm_.emplace_back("lstm" + std::to_string(l), d, cfg_.lstm_hidden[l]);
      d = cfg_.lstm_hidden[l];
    }
    std::size_t c = 1;
    for (std::size_t l = 0; l < cfg_.conv_channels.size(); ++l) {
      conv_.emplace_back("conv" + std::to_string(l), c, cfg_.conv_channels[l], cfg_.kernel);
      c = cfg_.conv_channels[l];
    }
    U_fc_ = nn::Param("fusion.U_fc", {cfg_.fusion_dim, cfg_.lstm_out()});
    U_conv_ = nn::Param("fusion.U_conv", {cfg_.fusion_dim, cfg_.conv_out()});
    W_head_ = nn::Param("head.W", {cfg_.classes, cfg_.fusion_dim});
    b_head_ = nn::Param("head.b", {cfg_.classes});
  }

  BiALSTM(const BiALSTM &o) : BiALSTM(o.cfg_) { copy_values_from(o); }
  BiALSTM &operator=(const BiALSTM &o) {
    if (this != &o) {
      BiALSTM tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  BiALSTM(BiALSTM &&) = default;
  BiALSTM &operator=(BiALSTM &&) = default;

  const BiALSTMConfig &config() const { return cfg_; }

  std::vector<nn::Param *> params() {
    std::vector<nn::Param *> out;
    for (auto &l : lstm_)
      for (auto *p : l.params()) out.push_back(p);
    for (auto &l : conv_)
      for (auto *p : l.params()) out.push_back(p);
    for (auto *p : {&U_fc_, &U_conv_, &W_head_, &b_head_}) out.push_back(p);
    return out;
  }
  std::vector<const nn::Param *> params() const {
    auto ps = const_cast<BiALSTM *>(this)->params();
    return {ps.begin(), ps.end()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto *p : params()) n += p->size();
    return n;
  }

  // Xavier-uniform weights, zero biases.
  void init(Rng &rng) {
    for (auto *p : params()) {
      if (p->shape.size() >= 2) nn::xavier_init(*p, rng);
      else std::fill(p->value.begin(), p->value.end(), 0.0);
    }
  }

  void zero_grad() {
    for (auto *p : params()) p->zero_grad();
  }

  // FNV-1a over the raw parameter bytes.
  std::string parameter_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto *p : params())
      for (double v : p->value) {
        const auto *b = reinterpret_cast<const unsigned char *>(&v);
        for (std::size_t i = 0; i < sizeof(double); ++i) {
          h ^= b[i];
          h *= 0x100000001b3ull;
        }
      }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }

  // Per-timestep intermediate handles, exposed for tests.
  struct Trace {
    std::vector<std::size_t> steps; // real timestep indices, forward order
    std::vector<nn::Var> h_fc, h_conv, fused, logits;
  };

  // Records one sequence on `t`. Padding rows are skipped by both units, so
  // their contents never reach a real timestep. `dropout_rng` non-null means
  // training mode.
  Trace forward(nn::Tape &t, const SequenceTensor &s, Rng *dropout_rng = nullptr) {
    require(s.dim == cfg_.input_dim, "bialstm: input width does not match the model");
    const bool training = dropout_rng != nullptr;
    Trace tr;
    for (std::size_t i = 0; i < s.alpha; ++i)
      if (s.mask[i]) tr.steps.push_back(i);
    const std::size_t n = tr.steps.size();

    // forward unit
    std::vector<nn::Var> h(lstm_.size()), c(lstm_.size());
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
      h[l] = t.zeros(lstm_[l].h, 1);
      c[l] = t.zeros(lstm_[l].h, 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = s.row(tr.steps[i]);
      nn::Var x = t.constant(std::vector<double>(row.begin(), row.end()), cfg_.input_dim, 1);
      x = nn::dropout(t, x, cfg_.input_dropout, training, dropout_rng);
      for (std::size_t l = 0; l < lstm_.size(); ++l) {
        std::tie(h[l], c[l]) = nn::lstm_step(t, lstm_[l], x, h[l], c[l]);
        x = h[l];
      }
      tr.h_fc.push_back(x);
    }

    // backward unit, run over the reversed sequence then re-reversed
    std::vector<nn::Var> H(conv_.size()), C(conv_.size());
    for (std::size_t l = 0; l < conv_.size(); ++l) {
      H[l] = t.zeros(conv_[l].cout, cfg_.conv_length(l));
      C[l] = t.zeros(conv_[l].cout, cfg_.conv_length(l));
    }
    tr.h_conv.assign(n, {});
    for (std::size_t i = n; i-- > 0;) {
      const auto row = s.row(tr.steps[i]);
      nn::Var X = t.constant(std::vector<double>(row.begin(), row.end()), 1, cfg_.input_dim);
      for (std::size_t l = 0; l < conv_.size(); ++l) {
        std::tie(H[l], C[l]) = nn::convlstm_step(t, conv_[l], X, H[l], C[l]);
        X = H[l];
        if (cfg_.pool_between_layers || l + 1 == conv_.size()) X = t.maxpool1d(X, 2, 2);
      }
      tr.h_conv[i] = X;
    }

    for (std::size_t i = 0; i < n; ++i) {
      const nn::Var a = t.l2normalize(t.matvec(t.param(U_conv_), tr.h_conv[i]), cfg_.eps);
      const nn::Var b = t.l2normalize(t.matvec(t.param(U_fc_), tr.h_fc[i]), cfg_.eps);
      const nn::Var fused = t.tanh(t.add(a, b));
      tr.fused.push_back(fused);
      const nn::Var z = nn::dropout(t, fused, cfg_.head_dropout, training, dropout_rng);
      tr.logits.push_back(t.add(t.matvec(t.param(W_head_), z), t.param(b_head_)));
    }
    return tr;
  }

  // Sum of per-timestep NLL over real rows (not averaged).
  nn::Var nll_sum(nn::Tape &t, const SequenceTensor &s, const Trace &tr) {
    std::vector<nn::Var> terms;
    for (std::size_t i = 0; i < tr.steps.size(); ++i) {
      const int y = s.y[tr.steps[i]];
      require(y >= 0 && static_cast<std::size_t>(y) < cfg_.classes, "bialstm: real row without a valid class");
      terms.push_back(t.softmax_nll(tr.logits[i], static_cast<std::size_t>(y)));
    }
    return t.sum(terms);
  }

  nn::Var l2_penalty(nn::Tape &t, double lambda) {
    std::vector<nn::Var> terms;
    for (auto *p : params()) terms.push_back(t.sum_squares(t.param(*p)));
    return t.scale(t.sum(terms), lambda);
  }

  // Loss of a batch: the NLL of every real timestep, summed or averaged per
  // `reduction`, plus lambda * sum of squared parameters. With
  // `accumulate_grads` the gradient is added to every Param::grad. Dropout
  // masks are drawn from `dropout_rng` when given.
  double batch_loss(std::span<const SequenceTensor *const> batch, double lambda, bool accumulate_grads,
                    Rng *dropout_rng = nullptr, NllReduction reduction = NllReduction::Mean) {
    std::size_t real = 0;
    for (const auto *s : batch) real += s->real_count();
    require(real > 0, "bialstm: batch has no real timesteps");
    const double inv = reduction == NllReduction::Mean ? 1.0 / static_cast<double>(real) : 1.0;
    double loss = 0;
    nn::Tape t;
    for (const auto *s : batch) {
      t.clear();
      const auto tr = forward(t, *s, dropout_rng);
      const nn::Var part = t.scale(nll_sum(t, *s, tr), inv);
      loss += t.scalar(part);
      if (accumulate_grads) t.backward(part);
    }
    if (lambda > 0) {
      t.clear();
      const nn::Var pen = l2_penalty(t, lambda);
      loss += t.scalar(pen);
      if (accumulate_grads) t.backward(pen);
    }
    if (!std::isfinite(loss)) throw NumericError("bialstm: non-finite loss");
    return loss;
  }

  // Class probabilities for every real timestep (eval mode, deterministic).
  std::vector<std::vector<double>> probabilities(const SequenceTensor &s) {
    nn::Tape t;
    const auto tr = forward(t, s);
    std::vector<std::vector<double>> out;
    for (auto z : tr.logits) {
      auto p = nn::Tape::softmax(t.value(z));
      for (double v : p)
        if (!std::isfinite(v)) throw NumericError("bialstm: non-finite output");
      out.push_back(std::move(p));
    }
    return out;
  }

  void copy_values_from(const BiALSTM &o) {
    require(cfg_ == o.cfg_, "bialstm: architecture mismatch");
    auto dst = params();
    auto src = o.params();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  }

  nn::Param &U_fc() { return U_fc_; }
  nn::Param &U_conv() { return U_conv_; }
  nn::Param &head_W() { return W_head_; }
  nn::Param &head_b() { return b_head_; }
  std::vector<nn::LSTMCellParams> &lstm_layers() { return lstm_; }
  std::vector<nn::ConvLSTMCellParams> &conv_layers() { return conv_; }

private:
  BiALSTMConfig cfg_;
  std::vector<nn::LSTMCellParams> lstm_;
  std::vector<nn::ConvLSTMCellParams> conv_;
  nn::Param U_fc_, U_conv_, W_head_, b_head_;
};

// The fusion step on plain vectors, for checking its algebra in isolation.
inline std::vector<double> fuse(std::span<const double> u_conv, std::span<const double> u_fc, double eps = 1e-12) {
  require(u_conv.size() == u_fc.size(), "fuse: projection sizes differ");
  auto norm = [](std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double na = norm(u_conv) + eps, nb = norm(u_fc) + eps;
  std::vector<double> h(u_conv.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(u_conv[i] / na + u_fc[i] / nb);
  return h;
}

struct TrainResult {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

// Adam on shuffled mini-batches; every random choice comes from the seed's
// init / dropout / shuffle substreams.
inline TrainResult train(BiALSTM &model, std::span<const SequenceTensor> data, const TrainConfig &cfg,
                         bool initialize = true) {
  cfg.validate();
  require(!data.empty(), "train: empty training set");
  if (initialize) {
    auto init_rng = substream(cfg.seed, stream::Init);
    model.init(init_rng);
  }
  auto drop_rng = substream(cfg.seed, stream::Dropout);
  auto shuffle_rng = substream(cfg.seed, stream::Shuffle);
  nn::Adam adam(model.params(), {.lr = cfg.lr});

  std::vector<const SequenceTensor *> order;
  for (const auto &s : data)
    if (s.real_count() > 0) order.push_back(&s);
  require(!order.empty(), "train: no sequence has a real timestep");

  TrainResult res;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const auto end = std::min(order.size(), b + cfg.batch_size);
      adam.zero_grad();
      total += model.batch_loss(std::span<const SequenceTensor *const>(order.data() + b, end - b), cfg.l2, true,
                                &drop_rng, cfg.reduction);
      adam.step();
      ++batches;
    }
    res.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  res.steps = adam.steps();
  return res;
}

// Per-flow predictions for every real timestep. Malicious iff the anomaly
// score reaches `threshold`.
inline std::vector<FlowPrediction> predict(BiALSTM &model, std::span<const SequenceTensor> data,
                                           double threshold = 0.5) {
  require(threshold >= 0.0 && threshold <= 1.0, "predict: threshold must be in [0, 1]");
  std::vector<FlowPrediction> out;
  for (std::size_t si = 0; si < data.size(); ++si) {
    const auto probs = model.probabilities(data[si]);
    std::size_t k = 0;
    for (std::size_t t = 0; t < data[si].alpha; ++t) {
      if (!data[si].mask[t]) continue;
      FlowPrediction p;
      p.sequence = si;
      p.timestep = t;
      p.probs = probs[k++];
      p.cls = static_cast<std::size_t>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
      p.anomaly = std::clamp(1.0 - p.probs[static_cast<std::size_t>(AbstractLabel::BENIGN)], 0.0, 1.0);
      p.malicious = p.anomaly >= threshold;
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ---- checkpoint ----------------------------------------------------------------

struct Checkpoint {
  BiALSTM model;
  NormalizationSpec normalizer;
  std::uint64_t seed = 0;
  std::vector<double> loss_curve;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint &ck) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto *p : ck.model.params())
    params.push_back({{"name", p->name}, {"shape", p->shape}, {"values", p->value}});
  nlohmann::json labels = nlohmann::json::object();
  const LabelMap map;
  for (const auto &[name, cls] : map.entries()) labels[name] = to_string(cls);
  return {{"format", "netsentry.bialstm"},
          {"version", 1},
          {"architecture", to_json(ck.model.config())},
          {"seed", ck.seed},
          {"normalizer", to_json(ck.normalizer)},
          {"classes", abstract_label_names()},
          {"label_map", labels},
          {"loss_curve", ck.loss_curve},
          {"parameter_hash", ck.model.parameter_hash()},
          {"parameters", params}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format") != "netsentry.bialstm") throw FormatError("not a Bi-ALSTM checkpoint");
    if (j.at("version") != 1) throw FormatError("unsupported checkpoint version");
    Checkpoint ck{BiALSTM(bialstm_config_from_json(j.at("architecture"))), normalizer_from_json(j.at("normalizer")),
                  j.at("seed").get<std::uint64_t>(), j.at("loss_curve").get<std::vector<double>>()};
    auto ps = ck.model.params();
    const auto &jp = j.at("parameters");
    if (jp.size() != ps.size()) throw FormatError("checkpoint parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (jp[i].at("name") != ps[i]->name) throw FormatError("checkpoint parameter order mismatch at " + ps[i]->name);
      auto v = jp[i].at("values").get<std::vector<double>>();
      if (v.size() != ps[i]->size()) throw FormatError("checkpoint size mismatch for " + ps[i]->name);
      ps[i]->value = std::move(v);
    }
    if (j.at("parameter_hash") != ck.model.parameter_hash()) throw FormatError("checkpoint parameter hash mismatch");
    return ck;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string &path, const Checkpoint &ck) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  out << checkpoint_to_json(ck).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError("checkpoint " + path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

} // namespace netsentry
