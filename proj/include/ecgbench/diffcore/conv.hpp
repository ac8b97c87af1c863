#pragma once

#include <limits>
#include <optional>
#include <type_traits>

#include "ecgbench/diffcore/linalg.hpp"

namespace ecgbench::diff {

/// Output length of a 1-D sliding window.
inline std::size_t conv_out_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                   std::size_t pad_left, std::size_t pad_right) {
  if (stride == 0) throw ShapeError("stride must be positive");
  if (kernel == 0 || kernel > length + pad_left + pad_right) {
    throw ShapeError("kernel of " + std::to_string(kernel) + " exceeds padded input of " +
                     std::to_string(length + pad_left + pad_right));
  }
  return (length + pad_left + pad_right - kernel) / stride + 1;
}

/// Cross-correlation of x[B×Cin×L] with w[Cout×Cin×K]; optional bias[Cout].
/// Computed as one GEMM over an im2col buffer spanning the whole batch.
template <class T>
Var<T> conv1d(Var<T> x, Var<T> w, std::size_t stride, std::size_t pad_left,
              std::size_t pad_right, std::optional<std::type_identity_t<Var<T>>> bias = std::nullopt) {
  const Array<T>& xv = x.value();
  const Array<T>& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 3 || xv.dim(1) != wv.dim(1)) {
    throw ShapeError("conv1d: input " + to_string(xv.shape()) + " incompatible with weight " +
                     to_string(wv.shape()));
  }
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != wv.dim(0))) {
    throw ShapeError("conv1d: bias shape " + to_string(bias->shape()));
  }
  const std::size_t B = xv.dim(0), cin = xv.dim(1), L = xv.dim(2);
  const std::size_t cout = wv.dim(0), K = wv.dim(2);
  const std::size_t Lo = conv_out_length(L, K, stride, pad_left, pad_right);
  const std::size_t rows = cin * K, cols = B * Lo;

  // col[(ci*K + k), b*Lo + l] = x[b, ci, l*stride + k - pad_left]
  Array<T> col(Shape{rows, cols});
  {
    T* c = col.mutable_data();
    const T* xs = xv.data();
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t k = 0; k < K; ++k) {
        T* crow = c + (ci * K + k) * cols;
        for (std::size_t b = 0; b < B; ++b) {
          const T* xrow = xs + (b * cin + ci) * L;
          for (std::size_t l = 0; l < Lo; ++l) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l * stride + k) -
                                       static_cast<std::ptrdiff_t>(pad_left);
            crow[b * Lo + l] =
                (src >= 0 && src < static_cast<std::ptrdiff_t>(L)) ? xrow[src] : T(0);
          }
        }
      }
    }
  }
  const auto ecout = static_cast<Eigen::Index>(cout);
  const auto erows = static_cast<Eigen::Index>(rows);
  const auto ecols = static_cast<Eigen::Index>(cols);
  detail::RowMat<T> prod =
      detail::ConstMap<T>(wv.data(), ecout, erows) * detail::ConstMap<T>(col.data(), erows, ecols);
  Array<T> out(Shape{B, cout, Lo});
  {
    T* o = out.mutable_data();
    const T* bv = bias ? bias->value().data() : nullptr;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t co = 0; co < cout; ++co) {
        const T shift = bv ? bv[co] : T(0);
        for (std::size_t l = 0; l < Lo; ++l) o[(b * cout + co) * Lo + l] = prod(co, b * Lo + l) + shift;
      }
    }
  }
  std::vector<int> inputs{x.id, w.id};
  if (bias) inputs.push_back(bias->id);
  const int ix = x.id, iw = w.id, ib = bias ? bias->id : -1;
  return x.tape->record(
      std::move(out), inputs,
      [=](Tape<T>& t, std::span<const T> g) {
        detail::RowMat<T> G(ecout, ecols);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t l = 0; l < Lo; ++l) G(co, b * Lo + l) = g[(b * cout + co) * Lo + l];
        if (ib >= 0) {
          if (auto gb = t.grad_buffer(ib); !gb.empty()) {
            for (std::size_t co = 0; co < cout; ++co) gb[co] += G.row(co).sum();
          }
        }
        if (auto gw = t.grad_buffer(iw); !gw.empty()) {
          detail::MutMap<T>(gw.data(), ecout, erows).noalias() +=
              G * detail::ConstMap<T>(col.data(), erows, ecols).transpose();
        }
        if (auto gx = t.grad_buffer(ix); !gx.empty()) {
          detail::RowMat<T> dcol = detail::ConstMap<T>(wv.data(), ecout, erows).transpose() * G;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t k = 0; k < K; ++k) {
              const T* drow = dcol.data() + (ci * K + k) * cols;
              for (std::size_t b = 0; b < B; ++b) {
                T* gxrow = gx.data() + (b * cin + ci) * L;
                for (std::size_t l = 0; l < Lo; ++l) {
                  const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l * stride + k) -
                                             static_cast<std::ptrdiff_t>(pad_left);
                  if (src >= 0 && src < static_cast<std::ptrdiff_t>(L)) gxrow[src] += drow[b * Lo + l];
                }
              }
            }
          }
        }
      },
      "conv1d");
}

/// Symmetric-padding convenience form.
template <class T>
Var<T> conv1d(Var<T> x, Var<T> w, std::size_t stride, std::size_t padding) {
  return conv1d(x, w, stride, padding, padding);
}

/// Per-channel (groups = channels) stride-1 convolution of x[B×C×L] with
/// w[C×K] and optional bias[C].
template <class T>
Var<T> depthwise_conv1d(Var<T> x, Var<T> w, std::size_t pad_left, std::size_t pad_right,
                        std::optional<std::type_identity_t<Var<T>>> bias = std::nullopt) {
  const Array<T>& xv = x.value();
  const Array<T>& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 2 || wv.dim(0) != xv.dim(1)) {
    throw ShapeError("depthwise_conv1d: input " + to_string(xv.shape()) +
                     " incompatible with weight " + to_string(wv.shape()));
  }
  const std::size_t B = xv.dim(0), C = xv.dim(1), L = xv.dim(2), K = wv.dim(1);
  const std::size_t Lo = conv_out_length(L, K, 1, pad_left, pad_right);
  Array<T> out(Shape{B, C, Lo});
  T* o = out.mutable_data();
  const T* xs = xv.data();
  const T* ws = wv.data();
  const T* bs = bias ? bias->value().data() : nullptr;
  auto at = [&](std::size_t l, std::size_t k) {
    return static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad_left);
  };
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* xr = xs + (b * C + c) * L;
      T* orow = o + (b * C + c) * Lo;
      for (std::size_t l = 0; l < Lo; ++l) {
        T s = bs ? bs[c] : T(0);
        for (std::size_t k = 0; k < K; ++k) {
          const auto src = at(l, k);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(L)) s += ws[c * K + k] * xr[src];
        }
        orow[l] = s;
      }
    }
  }
  std::vector<int> inputs{x.id, w.id};
  if (bias) inputs.push_back(bias->id);
  const int ix = x.id, iw = w.id, ib = bias ? bias->id : -1;
  return x.tape->record(
      std::move(out), inputs,
      [=](Tape<T>& t, std::span<const T> g) {
        auto gx = t.grad_buffer(ix);
        auto gw = t.grad_buffer(iw);
        std::span<T> gb = ib >= 0 ? t.grad_buffer(ib) : std::span<T>{};
        const T* xs = xv.data();
        const T* ws = wv.data();
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t c = 0; c < C; ++c) {
            const T* xr = xs + (b * C + c) * L;
            const T* gr = g.data() + (b * C + c) * Lo;
            for (std::size_t l = 0; l < Lo; ++l) {
              if (!gb.empty()) gb[c] += gr[l];
              for (std::size_t k = 0; k < K; ++k) {
                const auto src = static_cast<std::ptrdiff_t>(l + k) -
                                 static_cast<std::ptrdiff_t>(pad_left);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                if (!gw.empty()) gw[c * K + k] += gr[l] * xr[src];
                if (!gx.empty()) gx[(b * C + c) * L + src] += gr[l] * ws[c * K + k];
              }
            }
          }
        }
      },
      "depthwise_conv1d");
}

/// Max pooling over x[B×C×L]; padded positions never win.
template <class T>
Var<T> max_pool1d(Var<T> x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  const Array<T>& xv = x.value();
  if (xv.rank() != 3) throw ShapeError("max_pool1d: expected rank-3 input");
  const std::size_t B = xv.dim(0), C = xv.dim(1), L = xv.dim(2);
  const std::size_t Lo = conv_out_length(L, kernel, stride, padding, padding);
  Array<T> out(Shape{B, C, Lo});
  std::vector<std::size_t> arg(B * C * Lo);
  T* o = out.mutable_data();
  const T* xs = xv.data();
  for (std::size_t r = 0; r < B * C; ++r) {
    for (std::size_t l = 0; l < Lo; ++l) {
      T best = -std::numeric_limits<T>::infinity();
      std::size_t bi = 0;
      for (std::size_t k = 0; k < kernel; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(l * stride + k) -
                         static_cast<std::ptrdiff_t>(padding);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
        if (xs[r * L + src] > best) {
          best = xs[r * L + src];
          bi = static_cast<std::size_t>(src);
        }
      }
      o[r * Lo + l] = best;
      arg[r * Lo + l] = r * L + bi;
    }
  }
  const int ix = x.id;
  return x.tape->record(
      std::move(out), {ix},
      [ix, arg = std::move(arg)](Tape<T>& t, std::span<const T> g) {
        auto gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += g[i];
      },
      "max_pool1d");
}

}  // namespace ecgbench::diff
