#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tempalign/rng.hpp"
#include "tempalign/tensor.hpp"

// Differentiable operations. Each op computes its forward value and, when a
// Tape is active and some input requires a gradient, records the matching
// backward rule. Gradients accumulate additively; the caller owns zeroing.

namespace tempalign {

namespace detail {

inline bool recording(const Tensor& out) {
  return out.requires_grad() && Tape::active() != nullptr;
}

using ImplPtr = std::shared_ptr<TensorImpl>;

inline bool wants(const ImplPtr& t) { return t->requires_grad; }

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                         " by " + shape_str(b.shape()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
  const auto& A = a.data();
  const auto& B = b.data();
  auto& O = out.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = A[static_cast<std::size_t>(i) * k + p];
      if (av == 0.0) continue;
      const std::size_t brow = static_cast<std::size_t>(p) * n;
      const std::size_t orow = static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) O[orow + j] += av * B[brow + j];
    }
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, bi, oi, m, k, n] {
      if (oi->grad.empty()) return;
      const auto& G = oi->grad;
      if (detail::wants(ai)) {
        ai->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double s = 0.0;
            const std::size_t gr = static_cast<std::size_t>(i) * n;
            const std::size_t br = static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) s += G[gr + j] * bi->data[br + j];
            ai->grad[static_cast<std::size_t>(i) * k + p] += s;
          }
      }
      if (detail::wants(bi)) {
        bi->ensure_grad();
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            const double av = ai->data[static_cast<std::size_t>(i) * k + p];
            if (av == 0.0) continue;
            const std::size_t gr = static_cast<std::size_t>(i) * n;
            const std::size_t br = static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) bi->grad[br + j] += av * G[gr + j];
          }
      }
    });
  }
  return out;
}

// v (length k) times M (k x n) -> length n.
inline Tensor vecmat(const Tensor& v, const Tensor& m) {
  if (v.rank() != 1 || m.rank() != 2 || v.dim(0) != m.rows())
    throw DimensionError("vecmat: " + shape_str(v.shape()) + " by " + shape_str(m.shape()));
  const int k = m.rows(), n = m.cols();
  Tensor out = Tensor::zeros({n}, v.requires_grad() || m.requires_grad());
  const auto& V = v.data();
  const auto& M = m.data();
  auto& O = out.data();
  for (int p = 0; p < k; ++p) {
    const double vv = V[p];
    if (vv == 0.0) continue;
    const std::size_t mr = static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) O[j] += vv * M[mr + j];
  }
  if (detail::recording(out)) {
    auto vi = v.impl_ptr(), mi = m.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([vi, mi, oi, k, n] {
      if (oi->grad.empty()) return;
      const auto& G = oi->grad;
      if (detail::wants(vi)) {
        vi->ensure_grad();
        for (int p = 0; p < k; ++p) {
          double s = 0.0;
          const std::size_t mr = static_cast<std::size_t>(p) * n;
          for (int j = 0; j < n; ++j) s += G[j] * mi->data[mr + j];
          vi->grad[p] += s;
        }
      }
      if (detail::wants(mi)) {
        mi->ensure_grad();
        for (int p = 0; p < k; ++p) {
          const double vv = vi->data[p];
          if (vv == 0.0) continue;
          const std::size_t mr = static_cast<std::size_t>(p) * n;
          for (int j = 0; j < n; ++j) mi->grad[mr + j] += vv * G[j];
        }
      }
    });
  }
  return out;
}

namespace detail {

enum class Broadcast { None, Row, Scalar };

inline Broadcast add_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::None;
  if (b.numel() == 1) return Broadcast::Scalar;
  if (a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.cols()) return Broadcast::Row;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()) + " do not broadcast");
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  const auto mode = detail::add_mode(a, b, "add");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  const auto& A = a.data();
  const auto& B = b.data();
  auto& O = out.data();
  const std::size_t n = A.size(), bn = B.size();
  switch (mode) {
    case detail::Broadcast::None:
      for (std::size_t i = 0; i < n; ++i) O[i] = A[i] + B[i];
      break;
    case detail::Broadcast::Scalar:
      for (std::size_t i = 0; i < n; ++i) O[i] = A[i] + B[0];
      break;
    case detail::Broadcast::Row:
      for (std::size_t i = 0; i < n; ++i) O[i] = A[i] + B[i % bn];
      break;
  }
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, bi, oi, mode] {
      if (oi->grad.empty()) return;
      const auto& G = oi->grad;
      if (detail::wants(ai)) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < G.size(); ++i) ai->grad[i] += G[i];
      }
      if (detail::wants(bi)) {
        bi->ensure_grad();
        const std::size_t bn2 = bi->data.size();
        switch (mode) {
          case detail::Broadcast::None:
            for (std::size_t i = 0; i < G.size(); ++i) bi->grad[i] += G[i];
            break;
          case detail::Broadcast::Scalar:
            for (double g : G) bi->grad[0] += g;
            break;
          case detail::Broadcast::Row:
            for (std::size_t i = 0; i < G.size(); ++i) bi->grad[i % bn2] += G[i];
            break;
        }
      }
    });
  }
  return out;
}

// a (r x c) plus v (length r) broadcast down each column.
inline Tensor add_cols(const Tensor& a, const Tensor& v) {
  if (a.rank() != 2 || v.rank() != 1 || v.dim(0) != a.rows())
    throw DimensionError("add_cols: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(v.shape()));
  const int r = a.rows(), c = a.cols();
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || v.requires_grad());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) = a.at(i, j) + v.data()[i];
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), vi = v.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, vi, oi, r, c] {
      if (oi->grad.empty()) return;
      const auto& G = oi->grad;
      if (detail::wants(ai)) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < G.size(); ++i) ai->grad[i] += G[i];
      }
      if (detail::wants(vi)) {
        vi->ensure_grad();
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < c; ++j) s += G[static_cast<std::size_t>(i) * c + j];
          vi->grad[i] += s;
        }
      }
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  const auto mode = detail::add_mode(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  const auto& A = a.data();
  const auto& B = b.data();
  auto& O = out.data();
  const std::size_t n = A.size(), bn = B.size();
  switch (mode) {
    case detail::Broadcast::None:
      for (std::size_t i = 0; i < n; ++i) O[i] = A[i] * B[i];
      break;
    case detail::Broadcast::Scalar:
      for (std::size_t i = 0; i < n; ++i) O[i] = A[i] * B[0];
      break;
    case detail::Broadcast::Row:
      for (std::size_t i = 0; i < n; ++i) O[i] = A[i] * B[i % bn];
      break;
  }
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, bi, oi, mode] {
      if (oi->grad.empty()) return;
      const auto& G = oi->grad;
      const std::size_t bn2 = bi->data.size();
      if (detail::wants(ai)) {
        ai->ensure_grad();
        switch (mode) {
          case detail::Broadcast::None:
            for (std::size_t i = 0; i < G.size(); ++i) ai->grad[i] += G[i] * bi->data[i];
            break;
          case detail::Broadcast::Scalar:
            for (std::size_t i = 0; i < G.size(); ++i) ai->grad[i] += G[i] * bi->data[0];
            break;
          case detail::Broadcast::Row:
            for (std::size_t i = 0; i < G.size(); ++i) ai->grad[i] += G[i] * bi->data[i % bn2];
            break;
        }
      }
      if (detail::wants(bi)) {
        bi->ensure_grad();
        switch (mode) {
          case detail::Broadcast::None:
            for (std::size_t i = 0; i < G.size(); ++i) bi->grad[i] += G[i] * ai->data[i];
            break;
          case detail::Broadcast::Scalar:
            for (std::size_t i = 0; i < G.size(); ++i) bi->grad[0] += G[i] * ai->data[i];
            break;
          case detail::Broadcast::Row:
            for (std::size_t i = 0; i < G.size(); ++i) bi->grad[i % bn2] += G[i] * ai->data[i];
            break;
        }
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * c;
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, oi, c] {
      if (oi->grad.empty() || !detail::wants(ai)) return;
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += c * oi->grad[i];
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

namespace detail {

template <typename Fwd, typename Bwd>
Tensor pointwise(const Tensor& a, Fwd fwd, Bwd bwd_from_out) {
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = fwd(a.data()[i]);
  if (recording(out)) {
    auto ai = a.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, oi, bwd_from_out] {
      if (oi->grad.empty() || !wants(ai)) return;
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i)
        ai->grad[i] += oi->grad[i] * bwd_from_out(oi->data[i], ai->data[i]);
    });
  }
  return out;
}

}  // namespace detail

inline Tensor tanh(const Tensor& a) {
  return detail::pointwise(
      a, [](double x) { return std::tanh(x); },
      [](double y, double) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::pointwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double y, double) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& a) {
  return detail::pointwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

namespace detail {

// Iterates the slices of a rank-1/2 tensor along `axis`; slice elements are
// data[base + i*stride], i in [0, len).
struct AxisView {
  int n_slices, len;
  std::size_t slice_step, stride;
};

inline AxisView axis_view(const Shape& shape, int axis, const char* op) {
  if (shape.size() == 1) {
    if (axis != 0) throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                                        " out of range for " + shape_str(shape));
    return {1, shape[0], 0, 1};
  }
  if (shape.size() == 2) {
    const int r = shape[0], c = shape[1];
    if (axis == 0) return {c, r, 1, static_cast<std::size_t>(c)};   // down each column
    if (axis == 1) return {r, c, static_cast<std::size_t>(c), 1};   // along each row
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(shape));
  }
  throw DimensionError(std::string(op) + ": rank > 2 unsupported");
}

}  // namespace detail

// Log of summed exponentials along an axis, computed with the shift-by-max
// identity so it never overflows. Rank-1 input yields a scalar; rank-2 input
// yields the vector of per-slice results.
inline Tensor log_sum_exp(const Tensor& a, int axis) {
  const auto view = detail::axis_view(a.shape(), axis, "log_sum_exp");
  Tensor out = Tensor::zeros({view.n_slices}, a.requires_grad());
  const auto& A = a.data();
  for (int s = 0; s < view.n_slices; ++s) {
    const std::size_t base = s * view.slice_step;
    double mx = A[base];
    for (int i = 1; i < view.len; ++i) mx = std::max(mx, A[base + i * view.stride]);
    double acc = 0.0;
    for (int i = 0; i < view.len; ++i) acc += std::exp(A[base + i * view.stride] - mx);
    out.data()[s] = mx + std::log(acc);
  }
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, oi, view] {
      if (oi->grad.empty() || !detail::wants(ai)) return;
      ai->ensure_grad();
      for (int s = 0; s < view.n_slices; ++s) {
        const double g = oi->grad[s];
        if (g == 0.0) continue;
        const std::size_t base = s * view.slice_step;
        const double lse = oi->data[s];
        for (int i = 0; i < view.len; ++i) {
          const std::size_t idx = base + i * view.stride;
          ai->grad[idx] += g * std::exp(ai->data[idx] - lse);
        }
      }
    });
  }
  return out;
}

// Softmax along an axis; rows/columns sum to one.
inline Tensor softmax(const Tensor& a, int axis) {
  const auto view = detail::axis_view(a.shape(), axis, "softmax");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  const auto& A = a.data();
  auto& O = out.data();
  for (int s = 0; s < view.n_slices; ++s) {
    const std::size_t base = s * view.slice_step;
    double mx = A[base];
    for (int i = 1; i < view.len; ++i) mx = std::max(mx, A[base + i * view.stride]);
    double acc = 0.0;
    for (int i = 0; i < view.len; ++i) {
      const std::size_t idx = base + i * view.stride;
      O[idx] = std::exp(A[idx] - mx);
      acc += O[idx];
    }
    for (int i = 0; i < view.len; ++i) O[base + i * view.stride] /= acc;
  }
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, oi, view] {
      if (oi->grad.empty() || !detail::wants(ai)) return;
      ai->ensure_grad();
      for (int s = 0; s < view.n_slices; ++s) {
        const std::size_t base = s * view.slice_step;
        double dot = 0.0;
        for (int i = 0; i < view.len; ++i) {
          const std::size_t idx = base + i * view.stride;
          dot += oi->grad[idx] * oi->data[idx];
        }
        for (int i = 0; i < view.len; ++i) {
          const std::size_t idx = base + i * view.stride;
          ai->grad[idx] += (oi->grad[idx] - dot) * oi->data[idx];
        }
      }
    });
  }
  return out;
}

// Concatenation along axis 0 or 1. Rank-1 parts concatenate along axis 0
// only; rank-2 parts must agree on the other dimension.
inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no parts");
  const int rank = parts.front().rank();
  if (axis < 0 || axis >= rank)
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  bool needs = false;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw DimensionError("concat: mixed ranks");
    needs = needs || p.requires_grad();
  }
  Tensor out;
  std::vector<std::size_t> offsets;  // per part, flat element offset (axis 0) or column offset (axis 1)
  if (rank == 1 || axis == 0) {
    int total = 0;
    const int other = rank == 2 ? parts.front().cols() : 0;
    for (const auto& p : parts) {
      if (rank == 2 && p.cols() != other) throw DimensionError("concat: column counts differ");
      total += p.dim(0);
    }
    out = rank == 1 ? Tensor::zeros({total}, needs) : Tensor::zeros({total, other}, needs);
    std::size_t off = 0;
    for (const auto& p : parts) {
      offsets.push_back(off);
      std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
      off += p.numel();
    }
  } else {
    const int r = parts.front().rows();
    int total_c = 0;
    for (const auto& p : parts) {
      if (p.rows() != r) throw DimensionError("concat: row counts differ");
      total_c += p.cols();
    }
    out = Tensor::zeros({r, total_c}, needs);
    std::size_t coff = 0;
    for (const auto& p : parts) {
      offsets.push_back(coff);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < p.cols(); ++j) out.at(i, static_cast<int>(coff) + j) = p.at(i, j);
      coff += p.cols();
    }
  }
  if (detail::recording(out)) {
    std::vector<detail::ImplPtr> impls;
    for (const auto& p : parts) impls.push_back(p.impl_ptr());
    auto oi = out.impl_ptr();
    const bool flat = (rank == 1 || axis == 0);
    const int total_c = rank == 2 ? out.cols() : 0;
    Tape::active()->record([impls, oi, offsets, flat, total_c] {
      if (oi->grad.empty()) return;
      for (std::size_t pi = 0; pi < impls.size(); ++pi) {
        auto& p = impls[pi];
        if (!detail::wants(p)) continue;
        p->ensure_grad();
        if (flat) {
          for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += oi->grad[offsets[pi] + i];
        } else {
          const int pc = p->shape[1], pr = p->shape[0];
          for (int i = 0; i < pr; ++i)
            for (int j = 0; j < pc; ++j)
              p->grad[static_cast<std::size_t>(i) * pc + j] +=
                  oi->grad[static_cast<std::size_t>(i) * total_c + offsets[pi] + j];
        }
      }
    });
  }
  return out;
}

inline Tensor concat(const Tensor& a, const Tensor& b, int axis) { return concat({a, b}, axis); }

// Stacks equal-length vectors as the rows of a matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const int k = rows.front().dim(0);
  bool needs = false;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.dim(0) != k) throw DimensionError("stack_rows: ragged rows");
    needs = needs || r.requires_grad();
  }
  Tensor out = Tensor::zeros({static_cast<int>(rows.size()), k}, needs);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].data().begin(), rows[i].data().end(), out.data().begin() + i * k);
  if (detail::recording(out)) {
    std::vector<detail::ImplPtr> impls;
    for (const auto& r : rows) impls.push_back(r.impl_ptr());
    auto oi = out.impl_ptr();
    Tape::active()->record([impls, oi, k] {
      if (oi->grad.empty()) return;
      for (std::size_t i = 0; i < impls.size(); ++i) {
        if (!detail::wants(impls[i])) continue;
        impls[i]->ensure_grad();
        for (int j = 0; j < k; ++j) impls[i]->grad[j] += oi->grad[i * k + j];
      }
    });
  }
  return out;
}

// Row i of a matrix as a vector.
inline Tensor row(const Tensor& m, int i) {
  if (m.rank() != 2 || i < 0 || i >= m.rows())
    throw DimensionError("row: index " + std::to_string(i) + " in " + shape_str(m.shape()));
  const int c = m.cols();
  Tensor out = Tensor::zeros({c}, m.requires_grad());
  std::copy(m.data().begin() + static_cast<std::size_t>(i) * c,
            m.data().begin() + static_cast<std::size_t>(i + 1) * c, out.data().begin());
  if (detail::recording(out)) {
    auto mi = m.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([mi, oi, i, c] {
      if (oi->grad.empty() || !detail::wants(mi)) return;
      mi->ensure_grad();
      for (int j = 0; j < c; ++j) mi->grad[static_cast<std::size_t>(i) * c + j] += oi->grad[j];
    });
  }
  return out;
}

// Contiguous slice of a vector.
inline Tensor slice(const Tensor& v, int start, int len) {
  if (v.rank() != 1 || start < 0 || len <= 0 || start + len > v.dim(0))
    throw DimensionError("slice: [" + std::to_string(start) + ", +" + std::to_string(len) +
                         ") of " + shape_str(v.shape()));
  Tensor out = Tensor::zeros({len}, v.requires_grad());
  std::copy(v.data().begin() + start, v.data().begin() + start + len, out.data().begin());
  if (detail::recording(out)) {
    auto vi = v.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([vi, oi, start, len] {
      if (oi->grad.empty() || !detail::wants(vi)) return;
      vi->ensure_grad();
      for (int j = 0; j < len; ++j) vi->grad[start + j] += oi->grad[j];
    });
  }
  return out;
}

// Selects matrix rows by index; duplicate indices accumulate gradient.
inline Tensor gather_rows(const Tensor& m, const std::vector<int>& idx) {
  if (m.rank() != 2) throw DimensionError("gather_rows: expected matrix, got " + shape_str(m.shape()));
  const int c = m.cols();
  for (int i : idx)
    if (i < 0 || i >= m.rows())
      throw DimensionError("gather_rows: row " + std::to_string(i) + " in " + shape_str(m.shape()));
  Tensor out = Tensor::zeros({static_cast<int>(idx.size()), c}, m.requires_grad());
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(m.data().begin() + static_cast<std::size_t>(idx[r]) * c,
              m.data().begin() + static_cast<std::size_t>(idx[r] + 1) * c,
              out.data().begin() + r * c);
  if (detail::recording(out)) {
    auto mi = m.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([mi, oi, idx, c] {
      if (oi->grad.empty() || !detail::wants(mi)) return;
      mi->ensure_grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < c; ++j)
          mi->grad[static_cast<std::size_t>(idx[r]) * c + j] += oi->grad[r * c + j];
    });
  }
  return out;
}

// Single element as a scalar tensor.
inline Tensor pick(const Tensor& t, int flat_index) {
  if (flat_index < 0 || static_cast<std::size_t>(flat_index) >= t.numel())
    throw DimensionError("pick: index " + std::to_string(flat_index) + " in " + shape_str(t.shape()));
  Tensor out = Tensor::from({1}, {t.data()[flat_index]}, t.requires_grad());
  if (detail::recording(out)) {
    auto ti = t.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ti, oi, flat_index] {
      if (oi->grad.empty() || !detail::wants(ti)) return;
      ti->ensure_grad();
      ti->grad[flat_index] += oi->grad[0];
    });
  }
  return out;
}

inline Tensor pick(const Tensor& m, int r, int c) {
  if (m.rank() != 2) throw DimensionError("pick: expected matrix, got " + shape_str(m.shape()));
  return pick(m, r * m.cols() + c);
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::from({1}, {s}, a.requires_grad());
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, oi] {
      if (oi->grad.empty() || !detail::wants(ai)) return;
      ai->ensure_grad();
      for (auto& g : ai->grad) g += oi->grad[0];
    });
  }
  return out;
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

// Inverted dropout: keeps each element with probability 1-p and rescales by
// 1/(1-p), so evaluation (where this op is simply not applied) is the
// identity in expectation. The mask comes from the caller's deterministic
// stream.
inline Tensor dropout(const Tensor& a, double p, RngStream& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ParameterError("dropout: rate " + std::to_string(p) + " outside [0, 1)");
  if (p == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(a.numel());
  for (auto& m : *mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * (*mask)[i];
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, oi, mask] {
      if (oi->grad.empty() || !detail::wants(ai)) return;
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * (*mask)[i];
    });
  }
  return out;
}

// Identity forward; backward multiplies the incoming gradient by -lambda.
// Placing this between a feature extractor and a discriminator makes the
// discriminator an adversary of the features.
inline Tensor grad_reverse(const Tensor& a, double lambda) {
  if (lambda < 0.0)
    throw ParameterError("grad_reverse: lambda " + std::to_string(lambda) + " must be >= 0");
  Tensor out = Tensor::from(a.shape(), a.data(), a.requires_grad());
  if (detail::recording(out)) {
    auto ai = a.impl_ptr(), oi = out.impl_ptr();
    Tape::active()->record([ai, oi, lambda] {
      if (oi->grad.empty() || !detail::wants(ai)) return;
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += -lambda * oi->grad[i];
    });
  }
  return out;
}

// Plain (non-differentiable) transpose; used for constant matrices.
inline Tensor transposed(const Tensor& m) {
  if (m.rank() != 2) throw DimensionError("transposed: expected matrix, got " + shape_str(m.shape()));
  Tensor out = Tensor::zeros({m.cols(), m.rows()});
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.at(j, i) = m.at(i, j);
  return out;
}

}  // namespace tempalign
