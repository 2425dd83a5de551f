#pragma once

// Dense LSTM and 1-D convolutional LSTM cells on top of the tape.

#include <string>
#include <utility>
#include <vector>

#include "netsentry/nn/tape.hpp"

namespace netsentry::nn {

struct LSTMCellParams {
  std::size_t d = 0, h = 0;
  Param W_xi, W_hi, W_xf, W_hf, W_xc, W_hc, W_xo, W_ho;
  Param b_i, b_f, b_c, b_o;

  LSTMCellParams() = default;
  LSTMCellParams(const std::string &prefix, std::size_t d_, std::size_t h_)
      : d(d_), h(h_), W_xi(prefix + ".W_xi", {h_, d_}), W_hi(prefix + ".W_hi", {h_, h_}),
        W_xf(prefix + ".W_xf", {h_, d_}), W_hf(prefix + ".W_hf", {h_, h_}), W_xc(prefix + ".W_xc", {h_, d_}),
        W_hc(prefix + ".W_hc", {h_, h_}), W_xo(prefix + ".W_xo", {h_, d_}), W_ho(prefix + ".W_ho", {h_, h_}),
        b_i(prefix + ".b_i", {h_}), b_f(prefix + ".b_f", {h_}), b_c(prefix + ".b_c", {h_}),
        b_o(prefix + ".b_o", {h_}) {}

  std::vector<Param *> params() { return {&W_xi, &W_hi, &W_xf, &W_hf, &W_xc, &W_hc, &W_xo, &W_ho, &b_i, &b_f, &b_c, &b_o}; }
};

// One step: returns (h_t, c_t).
inline std::pair<Var, Var> lstm_step(Tape &t, LSTMCellParams &p, Var x, Var h_prev, Var c_prev) {
  require(t.numel(x) == p.d && t.numel(h_prev) == p.h && t.numel(c_prev) == p.h, "lstm_step: shape mismatch");
  auto gate = [&](Param &Wx, Param &Wh, Param &b) {
    return t.add(t.add(t.matvec(t.param(Wx), x), t.matvec(t.param(Wh), h_prev)), t.param(b));
  };
  const Var i = t.sigmoid(gate(p.W_xi, p.W_hi, p.b_i));
  const Var f = t.sigmoid(gate(p.W_xf, p.W_hf, p.b_f));
  const Var g = t.tanh(gate(p.W_xc, p.W_hc, p.b_c));
  const Var o = t.sigmoid(gate(p.W_xo, p.W_ho, p.b_o));
  const Var c = t.add(t.mul(f, c_prev), t.mul(i, g));
  const Var h = t.mul(o, t.tanh(c));
  return {h, c};
}

struct ConvLSTMCellParams {
  std::size_t cin = 0, cout = 0, k = 0;
  Param K_xi, K_hi, K_xf, K_hf, K_xc, K_hc, K_xo, K_ho;
  Param b_i, b_f, b_c, b_o;

  ConvLSTMCellParams() = default;
  ConvLSTMCellParams(const std::string &prefix, std::size_t cin_, std::size_t cout_, std::size_t k_)
      : cin(cin_), cout(cout_), k(k_), K_xi(prefix + ".K_xi", {cout_, cin_, k_}),
        K_hi(prefix + ".K_hi", {cout_, cout_, k_}), K_xf(prefix + ".K_xf", {cout_, cin_, k_}),
        K_hf(prefix + ".K_hf", {cout_, cout_, k_}), K_xc(prefix + ".K_xc", {cout_, cin_, k_}),
        K_hc(prefix + ".K_hc", {cout_, cout_, k_}), K_xo(prefix + ".K_xo", {cout_, cin_, k_}),
        K_ho(prefix + ".K_ho", {cout_, cout_, k_}), b_i(prefix + ".b_i", {cout_}), b_f(prefix + ".b_f", {cout_}),
        b_c(prefix + ".b_c", {cout_}), b_o(prefix + ".b_o", {cout_}) {}

  std::vector<Param *> params() { return {&K_xi, &K_hi, &K_xf, &K_hf, &K_xc, &K_hc, &K_xo, &K_ho, &b_i, &b_f, &b_c, &b_o}; }
};

// One step on a (cin x L) input with (cout x L) state: returns (H_t, C_t).
inline std::pair<Var, Var> convlstm_step(Tape &t, ConvLSTMCellParams &p, Var X, Var H_prev, Var C_prev) {
  const std::size_t L = t.cols(X);
  require(t.rows(X) == p.cin, "convlstm_step: input channel mismatch");
  require(t.rows(H_prev) == p.cout && t.cols(H_prev) == L && t.rows(C_prev) == p.cout && t.cols(C_prev) == L,
          "convlstm_step: state shape mismatch");
  auto gate = [&](Param &Kx, Param &Kh, Param &b) {
    const Var zx = t.conv1d(X, t.param(Kx), p.cout, p.cin, p.k);
    const Var zh = t.conv1d(H_prev, t.param(Kh), p.cout, p.cout, p.k);
    return t.add_row_bias(t.add(zx, zh), t.param(b));
  };
  const Var i = t.sigmoid(gate(p.K_xi, p.K_hi, p.b_i));
  const Var f = t.sigmoid(gate(p.K_xf, p.K_hf, p.b_f));
  const Var g = t.tanh(gate(p.K_xc, p.K_hc, p.b_c));
  const Var o = t.sigmoid(gate(p.K_xo, p.K_ho, p.b_o));
  const Var C = t.add(t.mul(f, C_prev), t.mul(i, g));
  const Var H = t.mul(o, t.tanh(C));
  return {H, C};
}

} // namespace netsentry::nn
