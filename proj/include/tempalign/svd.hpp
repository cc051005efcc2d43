#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tempalign/tensor.hpp"

namespace tempalign {

struct SvdResult {
  Tensor u;                   // m x n, orthonormal columns
  std::vector<double> sigma;  // n, non-negative, descending
  Tensor v;                   // n x n, orthogonal
};

namespace detail {

inline double col_dot(const std::vector<double>& a, int n, int p, int q, int rows) {
  double s = 0.0;
  for (int i = 0; i < rows; ++i)
    s += a[static_cast<std::size_t>(i) * n + p] * a[static_cast<std::size_t>(i) * n + q];
  return s;
}

inline void rotate_cols(std::vector<double>& a, int n, int p, int q, int rows, double c, double s) {
  for (int i = 0; i < rows; ++i) {
    const std::size_t ip = static_cast<std::size_t>(i) * n + p;
    const std::size_t iq = static_cast<std::size_t>(i) * n + q;
    const double ap = a[ip], aq = a[iq];
    a[ip] = c * ap - s * aq;
    a[iq] = s * ap + c * aq;
  }
}

}  // namespace detail

// Thin SVD of a dense matrix by one-sided Jacobi: plane rotations
// orthogonalize the columns of a working copy; column norms become the
// singular values and the accumulated rotations form V. Adequate for the
// small matrices used here (a few hundred columns).
inline SvdResult svd(const Tensor& m_in) {
  if (m_in.rank() != 2) throw DimensionError("svd: expected matrix, got " + shape_str(m_in.shape()));
  for (double x : m_in.data())
    if (!std::isfinite(x)) throw NumericError("svd: non-finite entry in input");

  const int rows = m_in.rows(), cols = m_in.cols();
  if (rows < cols) {
    // M = U S V^T  <=>  M^T = V S U^T
    SvdResult t = svd(transposed(m_in));
    return {t.v, std::move(t.sigma), t.u};
  }

  const int m = rows, n = cols;
  std::vector<double> b = m_in.data();
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

  const double tol = 1e-15;
  const int max_sweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double alpha = detail::col_dot(b, n, p, p, m);
        const double beta = detail::col_dot(b, n, q, q, m);
        const double gamma = detail::col_dot(b, n, p, q, m);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        detail::rotate_cols(b, n, p, q, m, c, s);
        detail::rotate_cols(v, n, p, q, n, c, s);
      }
    }
  }
  if (!converged) throw NumericError("svd: Jacobi sweeps did not converge");

  std::vector<double> sigma(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) sigma[static_cast<std::size_t>(j)] = std::sqrt(detail::col_dot(b, n, j, j, m));

  // Sort singular values descending, permuting B and V columns to match.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a2, int b2) { return sigma[static_cast<std::size_t>(a2)] > sigma[static_cast<std::size_t>(b2)]; });

  SvdResult out;
  out.u = Tensor::zeros({m, n});
  out.v = Tensor::zeros({n, n});
  out.sigma.resize(static_cast<std::size_t>(n));
  const double tiny = 1e-300;
  std::vector<int> unset;
  for (int j = 0; j < n; ++j) {
    const int src = order[static_cast<std::size_t>(j)];
    const double s = sigma[static_cast<std::size_t>(src)];
    out.sigma[static_cast<std::size_t>(j)] = s;
    for (int i = 0; i < n; ++i) out.v.at(i, j) = v[static_cast<std::size_t>(i) * n + src];
    if (s > tiny) {
      for (int i = 0; i < m; ++i) out.u.at(i, j) = b[static_cast<std::size_t>(i) * n + src] / s;
    } else {
      unset.push_back(j);
    }
  }
  // Zero singular values leave U columns undetermined; fill them with an
  // orthonormal completion so U always has orthonormal columns.
  for (int j : unset) {
    for (int basis = 0; basis < m; ++basis) {
      std::vector<double> cand(static_cast<std::size_t>(m), 0.0);
      cand[static_cast<std::size_t>(basis)] = 1.0;
      for (int k = 0; k < n; ++k) {
        if (k == j) continue;
        bool kset = std::find(unset.begin(), unset.end(), k) == unset.end() || k < j;
        if (!kset) continue;
        double d = 0.0;
        for (int i = 0; i < m; ++i) d += cand[static_cast<std::size_t>(i)] * out.u.at(i, k);
        for (int i = 0; i < m; ++i) cand[static_cast<std::size_t>(i)] -= d * out.u.at(i, k);
      }
      double nrm = 0.0;
      for (double x : cand) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > 0.5) {
        for (int i = 0; i < m; ++i) out.u.at(i, j) = cand[static_cast<std::size_t>(i)] / nrm;
        break;
      }
    }
  }
  return out;
}

}  // namespace tempalign
