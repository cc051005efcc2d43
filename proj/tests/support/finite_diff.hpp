#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tempalign/optim.hpp"
#include "tempalign/tensor.hpp"

// Independent gradient oracle: central finite differences on a scalar-valued
// forward function. The forward callback must rebuild the computation from
// the current parameter values on every call.

namespace tatest {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i]" of the worst deviation
};

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// Compares autodiff gradients (already accumulated in the params' grad
// buffers) against central differences of `forward`.
inline GradCheckResult check_gradients(const std::function<double()>& forward,
                                       tempalign::ParamList& params, double h = 1e-5) {
  GradCheckResult out;
  for (auto& p : params) {
    auto& data = p.value.data();
    auto& grad = p.value.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = forward();
      data[i] = orig - h;
      const double fm = forward();
      data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double e = rel_err(grad[i], numeric);
      if (e > out.max_rel_err) {
        out.max_rel_err = e;
        out.worst = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

// Runs forward once under a tape, backs the loss up, then finite-differences
// every parameter.
inline GradCheckResult finite_diff_check(const std::function<tempalign::Tensor()>& build_loss,
                                         tempalign::ParamList params, double h = 1e-5) {
  tempalign::zero_grads(params);
  {
    tempalign::Tape tape;
    tempalign::Tensor loss = build_loss();
    tape.backward(loss);
  }
  auto forward = [&]() { return build_loss().value(); };
  return check_gradients(forward, params, h);
}

}  // namespace tatest
