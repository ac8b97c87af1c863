#pragma once

#include <limits>

#include "ecgbench/diffcore/shape_ops.hpp"

namespace ecgbench::diff {

enum class ReduceOp { sum, mean, max };

/// Reduction along `axis`; the axis is removed from the result shape.
template <class T>
Var<T> reduce(ReduceOp op, Var<T> a, std::size_t axis) {
  const Array<T>& av = a.value();
  detail::check_axis(av.shape(), axis, "reduce");
  std::size_t outer, extent, inner;
  detail::split_axis(av.shape(), axis, outer, extent, inner);
  Shape shape = av.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Array<T> out(shape);
  T* o = out.mutable_data();
  const T* x = av.data();
  std::vector<std::size_t> argmax;
  if (op == ReduceOp::max) argmax.assign(outer * inner, 0);
  for (std::size_t p = 0; p < outer; ++p) {
    for (std::size_t i = 0; i < inner; ++i) {
      const T* col = x + p * extent * inner + i;
      if (op == ReduceOp::max) {
        std::size_t best = 0;
        for (std::size_t e = 1; e < extent; ++e) {
          if (col[e * inner] > col[best * inner]) best = e;
        }
        o[p * inner + i] = col[best * inner];
        argmax[p * inner + i] = best;
      } else {
        T s = 0;
        for (std::size_t e = 0; e < extent; ++e) s += col[e * inner];
        o[p * inner + i] = op == ReduceOp::mean ? s / static_cast<T>(extent) : s;
      }
    }
  }
  const int ia = a.id;
  return a.tape->record(
      std::move(out), {ia},
      [=, argmax = std::move(argmax)](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        const T w = op == ReduceOp::mean ? T(1) / static_cast<T>(extent) : T(1);
        for (std::size_t p = 0; p < outer; ++p) {
          for (std::size_t i = 0; i < inner; ++i) {
            const T gi = g[p * inner + i];
            T* col = ga.data() + p * extent * inner + i;
            if (op == ReduceOp::max) {
              col[argmax[p * inner + i] * inner] += gi;
            } else {
              for (std::size_t e = 0; e < extent; ++e) col[e * inner] += gi * w;
            }
          }
        }
      },
      op == ReduceOp::max ? "reduce_max" : (op == ReduceOp::mean ? "reduce_mean" : "reduce_sum"));
}

template <class T>
Var<T> sum(Var<T> a, std::size_t axis) {
  return reduce(ReduceOp::sum, a, axis);
}
template <class T>
Var<T> mean(Var<T> a, std::size_t axis) {
  return reduce(ReduceOp::mean, a, axis);
}

/// Mean of all elements as a scalar of shape ().
template <class T>
Var<T> mean_all(Var<T> a) {
  return reduce(ReduceOp::mean, reshape(a, Shape{a.size()}), 0);
}
template <class T>
Var<T> sum_all(Var<T> a) {
  return reduce(ReduceOp::sum, reshape(a, Shape{a.size()}), 0);
}

/// Inclusive prefix sum along the last axis.
template <class T>
Var<T> cumsum(Var<T> a) {
  const Array<T>& av = a.value();
  const std::size_t len = av.shape().back();
  const std::size_t rows = av.size() / len;
  Array<T> out(av.shape());
  T* o = out.mutable_data();
  const T* x = av.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::size_t i = 0; i < len; ++i) o[r * len + i] = (s += x[r * len + i]);
  }
  const int ia = a.id;
  return a.tape->record(
      std::move(out), {ia},
      [=](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        for (std::size_t r = 0; r < rows; ++r) {
          T s = 0;
          for (std::size_t i = len; i-- > 0;) ga[r * len + i] += (s += g[r * len + i]);
        }
      },
      "cumsum");
}

/// For prefix sums s[..., Q] returns d[..., Q, Q] with d[i][j] = exp(s_i - s_j)
/// for i >= j and 0 above the diagonal: the causal decay kernel of a scalar
/// linear recurrence.
template <class T>
Var<T> decay_matrix(Var<T> s) {
  const Array<T>& sv = s.value();
  const std::size_t q = sv.shape().back();
  const std::size_t rows = sv.size() / q;
  Shape shape = sv.shape();
  shape.push_back(q);
  Array<T> out(shape);
  T* o = out.mutable_data();
  const T* x = sv.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        o[(r * q + i) * q + j] = std::exp(x[r * q + i] - x[r * q + j]);
      }
    }
  }
  const int is = s.id;
  Array<T> saved = out;
  return s.tape->record(
      std::move(out), {is},
      [=](Tape<T>& t, std::span<const T> g) {
        auto gs = t.grad_buffer(is);
        const T* d = saved.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t i = 0; i < q; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
              const std::size_t k = (r * q + i) * q + j;
              const T v = g[k] * d[k];
              gs[r * q + i] += v;
              gs[r * q + j] -= v;
            }
          }
        }
      },
      "decay_matrix");
}

}  // namespace ecgbench::diff
