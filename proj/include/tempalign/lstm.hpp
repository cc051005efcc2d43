#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tempalign/optim.hpp"
#include "tempalign/ops.hpp"
#include "tempalign/rng.hpp"

namespace tempalign {

// Random orthogonal matrix via Gram-Schmidt on a Gaussian draw.
inline Tensor random_orthogonal(int n, RngStream& rng) {
  Tensor q = Tensor::zeros({n, n});
  for (int j = 0; j < n; ++j) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (auto& x : col) x = rng.normal();
    for (int k = 0; k < j; ++k) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += col[static_cast<std::size_t>(i)] * q.at(i, k);
      for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] -= d * q.at(i, k);
    }
    double nrm = 0.0;
    for (double x : col) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (int i = 0; i < n; ++i) q.at(i, j) = col[static_cast<std::size_t>(i)] / nrm;
  }
  return q;
}

// One LSTM direction. Gate layout along the 4H axis is [i f g o]; the
// forget-gate bias starts at 1, recurrent weights start orthogonal
// (per-gate blocks), input weights scaled-uniform.
class LstmCell {
 public:
  LstmCell() = default;

  LstmCell(int input_dim, int hidden_dim, RngStream& rng, const std::string& name)
      : input_dim_(input_dim), hidden_dim_(hidden_dim), name_(name) {
    w_ih_ = Tensor::zeros({input_dim, 4 * hidden_dim}, true);
    const double a = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (auto& x : w_ih_.data()) x = rng.uniform(-a, a);
    w_hh_ = Tensor::zeros({hidden_dim, 4 * hidden_dim}, true);
    for (int gate = 0; gate < 4; ++gate) {
      Tensor q = random_orthogonal(hidden_dim, rng);
      for (int i = 0; i < hidden_dim; ++i)
        for (int j = 0; j < hidden_dim; ++j) w_hh_.at(i, gate * hidden_dim + j) = q.at(i, j);
    }
    bias_ = Tensor::zeros({4 * hidden_dim}, true);
    for (int j = 0; j < hidden_dim; ++j) bias_.data()[hidden_dim + j] = 1.0;
  }

  int hidden_dim() const { return hidden_dim_; }
  int input_dim() const { return input_dim_; }

  // One step; x_proj is the precomputed row x_t * W_ih.
  std::pair<Tensor, Tensor> step(const Tensor& x_proj, const Tensor& h_prev,
                                 const Tensor& c_prev) const {
    const int h = hidden_dim_;
    Tensor gates = add(add(x_proj, vecmat(h_prev, w_hh_)), bias_);
    Tensor ig = sigmoid(slice(gates, 0, h));
    Tensor fg = sigmoid(slice(gates, h, h));
    Tensor gg = tanh(slice(gates, 2 * h, h));
    Tensor og = sigmoid(slice(gates, 3 * h, h));
    Tensor c = add(mul(fg, c_prev), mul(ig, gg));
    Tensor hidden = mul(og, tanh(c));
    return {hidden, c};
  }

  // Hidden states for the whole sequence, in input order. reverse_time runs
  // the recurrence from the last token backward.
  std::vector<Tensor> run(const Tensor& inputs, bool reverse_time) const {
    const int n = inputs.rows();
    Tensor projected = matmul(inputs, w_ih_);
    std::vector<Tensor> states(static_cast<std::size_t>(n));
    Tensor h = Tensor::zeros({hidden_dim_});
    Tensor c = Tensor::zeros({hidden_dim_});
    for (int k = 0; k < n; ++k) {
      const int t = reverse_time ? n - 1 - k : k;
      auto [h2, c2] = step(row(projected, t), h, c);
      h = h2;
      c = c2;
      states[static_cast<std::size_t>(t)] = h;
    }
    return states;
  }

  void collect_params(ParamList& out) const {
    out.push_back({name_ + ".w_ih", w_ih_});
    out.push_back({name_ + ".w_hh", w_hh_});
    out.push_back({name_ + ".bias", bias_});
  }

  Tensor& w_ih() { return w_ih_; }
  Tensor& w_hh() { return w_hh_; }
  Tensor& bias() { return bias_; }

 private:
  int input_dim_ = 0;
  int hidden_dim_ = 0;
  std::string name_;
  Tensor w_ih_, w_hh_, bias_;
};

// Bidirectional encoder: forward and backward LSTM states concatenated per
// position, n x 2H.
class BiLstmEncoder {
 public:
  BiLstmEncoder() = default;

  BiLstmEncoder(int input_dim, int hidden_dim, RngStream& rng)
      : fwd_(input_dim, hidden_dim, rng, "lstm.fwd"), bwd_(input_dim, hidden_dim, rng, "lstm.bwd") {}

  int output_dim() const { return 2 * fwd_.hidden_dim(); }
  int hidden_dim() const { return fwd_.hidden_dim(); }
  int input_dim() const { return fwd_.input_dim(); }

  Tensor encode(const Tensor& features) const {
    if (features.rank() != 2 || features.rows() < 1)
      throw ContractError("encode: expected a non-empty n x S feature matrix, got " +
                          shape_str(features.shape()));
    auto f_states = fwd_.run(features, false);
    auto b_states = bwd_.run(features, true);
    return concat(stack_rows(f_states), stack_rows(b_states), 1);
  }

  void collect_params(ParamList& out) const {
    fwd_.collect_params(out);
    bwd_.collect_params(out);
  }

  LstmCell& forward_cell() { return fwd_; }
  LstmCell& backward_cell() { return bwd_; }

 private:
  LstmCell fwd_, bwd_;
};

}  // namespace tempalign
