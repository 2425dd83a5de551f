#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "netsentry/nn/tape.hpp"
#include "netsentry/rng.hpp"

namespace netsentry::nn {

// Glorot/Xavier uniform. For kernels shaped (out, in, k) the receptive field
// k multiplies both fans.
inline void xavier_init(Param &p, Rng &rng) {
  require(p.shape.size() >= 2, "xavier_init: needs a matrix or kernel");
  std::size_t receptive = 1;
  for (std::size_t i = 2; i < p.shape.size(); ++i) receptive *= p.shape[i];
  const double fan_out = static_cast<double>(p.shape[0] * receptive);
  const double fan_in = static_cast<double>(p.shape[1] * receptive);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (double &v : p.value) v = u(rng);
}

// Inverted-dropout mask: 0 with probability p, else 1/(1-p).
inline std::vector<double> dropout_mask(std::size_t n, double p, Rng &rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  std::vector<double> m(n, 1.0);
  if (p == 0.0) return m;
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  for (double &v : m) v = keep(rng) ? s : 0.0;
  return m;
}

inline Var dropout(Tape &t, Var x, double p, bool training, Rng *rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  require(rng != nullptr, "dropout: training mode needs an rng");
  return t.apply_mask(x, dropout_mask(t.numel(x), p, *rng));
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
public:
  explicit Adam(std::vector<Param *> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    for (auto *p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  std::size_t steps() const { return t_; }

  // Applies one update from the accumulated Param::grad buffers.
  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto &p = *params_[k];
      auto &m = m_[k];
      auto &v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i];
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name);
        m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g * g;
        p.value[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      }
    }
  }

  void zero_grad() {
    for (auto *p : params_) p->zero_grad();
  }

private:
  std::vector<Param *> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

} // namespace netsentry::nn
