#pragma once

// Reverse-mode differentiation over flat double buffers. A Tape records each
// operation's output and a closure that pushes gradients to its inputs;
// backward() replays the closures in reverse. Parameters live outside the
// tape and accumulate their gradients in place, so one set of weights can be
// reused across many timesteps without copying.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "netsentry/error.hpp"

namespace netsentry::nn {

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
    const auto sz = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    value.assign(sz, 0.0);
    grad.assign(sz, 0.0);
  }

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape {
public:
  Tape() { nodes_.reserve(1024); }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  std::span<const double> value(Var v) const {
    const auto &n = nodes_[v.id];
    return n.param ? std::span<const double>(n.param->value) : std::span<const double>(n.v);
  }
  double scalar(Var v) const { return value(v)[0]; }
  std::size_t rows(Var v) const { return nodes_[v.id].rows; }
  std::size_t cols(Var v) const { return nodes_[v.id].cols; }
  std::size_t numel(Var v) const { return value(v).size(); }

  // Gradient of the last backward() target with respect to `v`; empty if
  // nothing flowed into it.
  std::span<const double> grad(Var v) const {
    const auto &n = nodes_[v.id];
    return n.param ? std::span<const double>(n.param->grad) : std::span<const double>(n.g);
  }

  // ---- leaves ---------------------------------------------------------------

  Var constant(std::vector<double> v, std::size_t rows, std::size_t cols) {
    require(v.size() == rows * cols, "tape: constant shape mismatch");
    return push(std::move(v), rows, cols, nullptr);
  }
  Var constant(std::vector<double> v) {
    const auto n = v.size();
    return constant(std::move(v), 1, n);
  }
  Var zeros(std::size_t rows, std::size_t cols) { return constant(std::vector<double>(rows * cols, 0.0), rows, cols); }

  Var param(Param &p) {
    Node n;
    n.param = &p;
    n.rows = p.shape.empty() ? 1 : p.shape.front();
    n.cols = p.size() / std::max<std::size_t>(1, n.rows);
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  // ---- ops ------------------------------------------------------------------

  // W (r x c) times x (c) -> r
  Var matvec(Var W, Var x) {
    const std::size_t r = rows(W), c = cols(W);
    require(numel(x) == c, "tape: matvec shape mismatch");
    std::vector<double> y(r, 0.0);
    {
      const auto w = value(W), xv = value(x);
      for (std::size_t i = 0; i < r; ++i) {
        const double *wr = w.data() + i * c;
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) s += wr[j] * xv[j];
        y[i] = s;
      }
    }
    return push(std::move(y), r, 1, [W, x, r, c](Tape &t, const double *g) {
      const auto w = t.value(W), xv = t.value(x);
      if (t.wants(W)) {
        double *gw = t.gbuf(W);
        for (std::size_t i = 0; i < r; ++i) {
          if (g[i] == 0.0) continue;
          double *row = gw + i * c;
          for (std::size_t j = 0; j < c; ++j) row[j] += g[i] * xv[j];
        }
      }
      if (t.wants(x)) {
        double *gx = t.gbuf(x);
        for (std::size_t i = 0; i < r; ++i) {
          const double *wr = w.data() + i * c;
          for (std::size_t j = 0; j < c; ++j) gx[j] += wr[j] * g[i];
        }
      }
    });
  }

  Var add(Var a, Var b) {
    require(numel(a) == numel(b), "tape: add shape mismatch");
    std::vector<double> y(value(a).begin(), value(a).end());
    const auto bv = value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    const auto n = y.size();
    return push(std::move(y), rows(a), cols(a), [a, b, n](Tape &t, const double *g) {
      for (Var v : {a, b})
        if (t.wants(v)) {
          double *gv = t.gbuf(v);
          for (std::size_t i = 0; i < n; ++i) gv[i] += g[i];
        }
    });
  }

  Var mul(Var a, Var b) {
    require(numel(a) == numel(b), "tape: mul shape mismatch");
    const auto av = value(a), bv = value(b);
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    const auto n = y.size();
    return push(std::move(y), rows(a), cols(a), [a, b, n](Tape &t, const double *g) {
      const auto av = t.value(a), bv = t.value(b);
      if (t.wants(a)) {
        double *ga = t.gbuf(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
      }
      if (t.wants(b)) {
        double *gb = t.gbuf(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
      }
    });
  }

  Var scale(Var a, double s) {
    std::vector<double> y(value(a).begin(), value(a).end());
    for (double &v : y) v *= s;
    const auto n = y.size();
    return push(std::move(y), rows(a), cols(a), [a, s, n](Tape &t, const double *g) {
      if (!t.wants(a)) return;
      double *ga = t.gbuf(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] += s * g[i];
    });
  }

  Var sigmoid(Var a) {
    std::vector<double> y(value(a).begin(), value(a).end());
    for (double &v : y) v = 1.0 / (1.0 + std::exp(-v));
    const auto n = y.size();
    const Var out{nodes_.size()};
    return push(std::move(y), rows(a), cols(a), [a, out, n](Tape &t, const double *g) {
      if (!t.wants(a)) return;
      const auto yv = t.value(out);
      double *ga = t.gbuf(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * yv[i] * (1.0 - yv[i]);
    });
  }

  Var tanh(Var a) {
    std::vector<double> y(value(a).begin(), value(a).end());
    for (double &v : y) v = std::tanh(v);
    const auto n = y.size();
    const Var out{nodes_.size()};
    return push(std::move(y), rows(a), cols(a), [a, out, n](Tape &t, const double *g) {
      if (!t.wants(a)) return;
      const auto yv = t.value(out);
      double *ga = t.gbuf(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1.0 - yv[i] * yv[i]);
    });
  }

  // x (c x L) plus a per-row bias b (c)
  Var add_row_bias(Var x, Var b) {
    const std::size_t c = rows(x), L = cols(x);
    require(numel(b) == c, "tape: row bias shape mismatch");
    std::vector<double> y(value(x).begin(), value(x).end());
    const auto bv = value(b);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < L; ++j) y[i * L + j] += bv[i];
    return push(std::move(y), c, L, [x, b, c, L](Tape &t, const double *g) {
      if (t.wants(x)) {
        double *gx = t.gbuf(x);
        for (std::size_t i = 0; i < c * L; ++i) gx[i] += g[i];
      }
      if (t.wants(b)) {
        double *gb = t.gbuf(b);
        for (std::size_t i = 0; i < c; ++i)
          for (std::size_t j = 0; j < L; ++j) gb[i] += g[i * L + j];
      }
    });
  }

  // Same-padded 1-D cross-correlation. x: cin x L, K: cout x cin x k (k odd)
  // -> cout x L.
  Var conv1d(Var x, Var K, std::size_t cout, std::size_t cin, std::size_t k) {
    const std::size_t L = cols(x);
    require(rows(x) == cin && numel(K) == cout * cin * k, "tape: conv1d shape mismatch");
    require(k % 2 == 1, "tape: conv1d kernel size must be odd");
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
    std::vector<double> y(cout * L, 0.0);
    {
      const auto xv = value(x), kv = value(K);
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t i = 0; i < cin; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double w = kv[(o * cin + i) * k + j];
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - half;
            const std::size_t lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
            const std::size_t hi = off > 0 ? L - static_cast<std::size_t>(off) : L;
            const double *xr = xv.data() + i * L;
            double *yr = y.data() + o * L;
            for (std::size_t p = lo; p < hi; ++p) yr[p] += w * xr[p + off];
          }
    }
    return push(std::move(y), cout, L, [x, K, cout, cin, k, L, half](Tape &t, const double *g) {
      const auto xv = t.value(x), kv = t.value(K);
      const bool wx = t.wants(x), wk = t.wants(K);
      double *gx = wx ? t.gbuf(x) : nullptr;
      double *gk = wk ? t.gbuf(K) : nullptr;
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t i = 0; i < cin; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - half;
            const std::size_t lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
            const std::size_t hi = off > 0 ? L - static_cast<std::size_t>(off) : L;
            const double *gr = g + o * L;
            const double *xr = xv.data() + i * L;
            const std::size_t wi = (o * cin + i) * k + j;
            if (wk) {
              double s = 0;
              for (std::size_t p = lo; p < hi; ++p) s += gr[p] * xr[p + off];
              gk[wi] += s;
            }
            if (wx) {
              const double w = kv[wi];
              double *gxr = gx + i * L;
              for (std::size_t p = lo; p < hi; ++p) gxr[p + off] += w * gr[p];
            }
          }
    });
  }

  // Max-pool along each row with window k and stride s (floor mode).
  Var maxpool1d(Var x, std::size_t k = 2, std::size_t s = 2) {
    const std::size_t c = rows(x), L = cols(x);
    require(k >= 1 && s >= 1 && L >= k, "tape: maxpool1d window larger than input");
    const std::size_t out_len = (L - k) / s + 1;
    std::vector<double> y(c * out_len);
    std::vector<std::size_t> arg(c * out_len);
    const auto xv = value(x);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t p = 0; p < out_len; ++p) {
        std::size_t best = i * L + p * s;
        for (std::size_t j = 1; j < k; ++j)
          if (xv[i * L + p * s + j] > xv[best]) best = i * L + p * s + j;
        y[i * out_len + p] = xv[best];
        arg[i * out_len + p] = best;
      }
    return push(std::move(y), c, out_len, [x, arg = std::move(arg)](Tape &t, const double *g) {
      if (!t.wants(x)) return;
      double *gx = t.gbuf(x);
      for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += g[i];
    });
  }

  // x / (||x||_2 + eps)
  Var l2normalize(Var x, double eps) {
    const auto xv = value(x);
    double nrm = 0;
    for (double v : xv) nrm += v * v;
    nrm = std::sqrt(nrm);
    const double den = nrm + eps;
    std::vector<double> y(xv.begin(), xv.end());
    for (double &v : y) v /= den;
    const auto n = y.size();
    return push(std::move(y), rows(x), cols(x), [x, nrm, den, n](Tape &t, const double *g) {
      if (!t.wants(x)) return;
      const auto xv = t.value(x);
      double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += g[i] * xv[i];
      const double c2 = nrm > 0 ? dot / (nrm * den * den) : 0.0;
      double *gx = t.gbuf(x);
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] / den - xv[i] * c2;
    });
  }

  // Elementwise product with a fixed mask (inverted dropout passes
  // keep/(1-p) or 0 per element).
  Var apply_mask(Var x, std::vector<double> mask) {
    require(mask.size() == numel(x), "tape: mask shape mismatch");
    std::vector<double> y(value(x).begin(), value(x).end());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
    return push(std::move(y), rows(x), cols(x), [x, mask = std::move(mask)](Tape &t, const double *g) {
      if (!t.wants(x)) return;
      double *gx = t.gbuf(x);
      for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }

  // -log softmax(z)[target]
  Var softmax_nll(Var z, std::size_t target) {
    const auto zv = value(z);
    require(target < zv.size(), "tape: nll target out of range");
    auto p = softmax(zv);
    const double loss = -std::log(std::max(p[target], 1e-300));
    return push({loss}, 1, 1, [z, target, p = std::move(p)](Tape &t, const double *g) {
      if (!t.wants(z)) return;
      double *gz = t.gbuf(z);
      for (std::size_t i = 0; i < p.size(); ++i) gz[i] += g[0] * (p[i] - (i == target ? 1.0 : 0.0));
    });
  }

  Var sum_squares(Var x) {
    double s = 0;
    for (double v : value(x)) s += v * v;
    return push({s}, 1, 1, [x](Tape &t, const double *g) {
      if (!t.wants(x)) return;
      const auto xv = t.value(x);
      double *gx = t.gbuf(x);
      for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += 2.0 * g[0] * xv[i];
    });
  }

  // Sum of scalar nodes.
  Var sum(std::span<const Var> xs) {
    double s = 0;
    for (Var v : xs) s += scalar(v);
    return push({s}, 1, 1, [ids = std::vector<Var>(xs.begin(), xs.end())](Tape &t, const double *g) {
      for (Var v : ids)
        if (t.wants(v)) t.gbuf(v)[0] += g[0];
    });
  }

  // ---- backward -------------------------------------------------------------

  // Seeds d(target)/d(target) = 1 and propagates to every recorded input.
  // Parameter gradients accumulate into Param::grad.
  void backward(Var target) {
    require(numel(target) == 1, "tape: backward target must be a scalar");
    if (!std::isfinite(scalar(target))) throw NumericError("non-finite loss in backward pass");
    for (auto &n : nodes_) n.live = false;
    nodes_[target.id].live = true;
    gbuf(target)[0] += 1.0;
    for (std::size_t id = target.id + 1; id-- > 0;) {
      auto &n = nodes_[id];
      if (!n.live || !n.back) continue;
      const double *g = n.param ? n.param->grad.data() : n.g.data();
      n.back(*this, g);
    }
  }

  static std::vector<double> softmax(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
    for (double &v : p) v /= s;
    return p;
  }

private:
  using Backward = std::function<void(Tape &, const double *)>;

  struct Node {
    std::vector<double> v;
    std::vector<double> g;
    Param *param = nullptr;
    std::size_t rows = 1, cols = 1;
    Backward back;
    bool live = false;
  };

  Var push(std::vector<double> v, std::size_t r, std::size_t c, Backward back = {}) {
    Node n;
    n.v = std::move(v);
    n.rows = r;
    n.cols = c;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  // Inputs only receive gradient if they can pass it on (ops) or store it
  // (parameters); constants are skipped.
  bool wants(Var v) const {
    const auto &n = nodes_[v.id];
    return n.param != nullptr || static_cast<bool>(n.back);
  }

  double *gbuf(Var v) {
    auto &n = nodes_[v.id];
    n.live = true;
    if (n.param) return n.param->grad.data();
    if (n.g.empty()) n.g.assign(n.v.size(), 0.0);
    return n.g.data();
  }

  std::vector<Node> nodes_;
};

} // namespace netsentry::nn
