#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tempalign/tensor.hpp"

namespace tempalign {

struct NamedParam {
  std::string name;
  Tensor value;
};

using ParamList = std::vector<NamedParam>;

inline void zero_grads(ParamList& params) {
  for (auto& p : params) p.value.zero_grad();
}

// Global-norm gradient clipping over a parameter group. max_norm <= 0 disables.
inline double clip_grad_norm(ParamList& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (double g : p.value.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      if (!p.value.has_grad()) continue;
      for (double& g : p.value.grad()) g *= s;
    }
  }
  return norm;
}

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW: bias-corrected Adam moments with the weight decay applied directly
// to the parameter, outside the moment estimates. Per-parameter state is
// keyed by storage identity, so a parameter's moments advance only on the
// steps that actually include it.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  void step(ParamList& params) {
    for (auto& p : params) {
      auto& st = states_[p.value.impl()];
      if (st.m.empty()) {
        st.m.assign(p.value.numel(), 0.0);
        st.v.assign(p.value.numel(), 0.0);
      }
      st.t += 1;
      auto& theta = p.value.data();
      auto& g = p.value.grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
          throw NumericError("adamw: non-finite gradient in parameter '" + p.name + "'");
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(st.t));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(st.t));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g[i];
        st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        theta[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * theta[i]);
      }
    }
  }

  std::uint64_t step_count(const Tensor& param) const {
    auto it = states_.find(param.impl());
    return it == states_.end() ? 0 : it->second.t;
  }

 private:
  struct State {
    std::vector<double> m, v;
    std::uint64_t t = 0;
  };
  AdamWConfig cfg_;
  std::map<const detail::TensorImpl*, State> states_;
};

// Plain gradient descent. Exists so the gradient-reversal update rule can be
// verified literally, without Adam's per-parameter rescaling.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void step(ParamList& params) {
    for (auto& p : params) {
      if (!p.value.has_grad()) continue;
      auto& theta = p.value.data();
      auto& g = p.value.grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
          throw NumericError("sgd: non-finite gradient in parameter '" + p.name + "'");
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr_ * g[i];
    }
  }

 private:
  double lr_;
};

}  // namespace tempalign
