#pragma once

#include <cmath>
#include <vector>

#include "ecgbench/diffcore/tape.hpp"

namespace ecgbench::diff {

/// Softmax over the last axis.
template <class T>
Var<T> softmax(Var<T> a) {
  const Array<T>& av = a.value();
  const std::size_t n = av.shape().back();
  const std::size_t rows = av.size() / n;
  Array<T> out(av.shape());
  T* o = out.mutable_data();
  const T* x = av.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * n;
    T* orow = o + r * n;
    const T mx = *std::max_element(xr, xr + n);
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (orow[i] = std::exp(xr[i] - mx));
    for (std::size_t i = 0; i < n; ++i) orow[i] /= s;
  }
  const int ia = a.id;
  Array<T> saved = out;
  return a.tape->record(
      std::move(out), {ia},
      [=](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        const T* y = saved.data();
        for (std::size_t r = 0; r < rows; ++r) {
          T dot = 0;
          for (std::size_t i = 0; i < n; ++i) dot += g[r * n + i] * y[r * n + i];
          for (std::size_t i = 0; i < n; ++i) ga[r * n + i] += y[r * n + i] * (g[r * n + i] - dot);
        }
      },
      "softmax");
}

/// Normalisation over the last axis with affine gamma/beta of that extent.
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
  const Array<T>& xv = x.value();
  const std::size_t n = xv.shape().back();
  if (gamma.value().shape() != Shape{n} || beta.value().shape() != Shape{n}) {
    throw ShapeError("layer_norm: affine parameters must have shape (" + std::to_string(n) + ")");
  }
  const std::size_t rows = xv.size() / n;
  Array<T> out(xv.shape());
  Array<T> xhat(xv.shape());
  std::vector<T> inv_std(rows);
  {
    T* o = out.mutable_data();
    T* h = xhat.mutable_data();
    const T* xs = xv.data();
    const T* gs = gamma.value().data();
    const T* bs = beta.value().data();
    for (std::size_t r = 0; r < rows; ++r) {
      T mu = 0, var = 0;
      for (std::size_t i = 0; i < n; ++i) mu += xs[r * n + i];
      mu /= static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i) var += (xs[r * n + i] - mu) * (xs[r * n + i] - mu);
      var /= static_cast<T>(n);
      inv_std[r] = T(1) / std::sqrt(var + eps);
      for (std::size_t i = 0; i < n; ++i) {
        h[r * n + i] = (xs[r * n + i] - mu) * inv_std[r];
        o[r * n + i] = gs[i] * h[r * n + i] + bs[i];
      }
    }
  }
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  const Array<T> gv = gamma.value();
  return x.tape->record(
      std::move(out), {ix, ig, ib},
      [=](Tape<T>& t, std::span<const T> g) {
        auto gx = t.grad_buffer(ix);
        auto gg = t.grad_buffer(ig);
        auto gb = t.grad_buffer(ib);
        const T* h = xhat.data();
        const T* gam = gv.data();
        std::vector<T> dh(n);
        for (std::size_t r = 0; r < rows; ++r) {
          T m1 = 0, m2 = 0;
          for (std::size_t i = 0; i < n; ++i) {
            const T gi = g[r * n + i];
            if (!gg.empty()) gg[i] += gi * h[r * n + i];
            if (!gb.empty()) gb[i] += gi;
            dh[i] = gi * gam[i];
            m1 += dh[i];
            m2 += dh[i] * h[r * n + i];
          }
          if (gx.empty()) continue;
          m1 /= static_cast<T>(n);
          m2 /= static_cast<T>(n);
          for (std::size_t i = 0; i < n; ++i) {
            gx[r * n + i] += inv_std[r] * (dh[i] - m1 - h[r * n + i] * m2);
          }
        }
      },
      "layer_norm");
}

/// Per-channel statistics produced by a training-mode batch_norm call.
template <class T>
struct BatchStats {
  std::vector<T> mean;
  std::vector<T> var;  // biased
  std::size_t count = 0;
};

/// Batch normalisation of x[B×C×L] over (B, L) per channel. In training mode
/// the batch statistics are used and reported through `stats`; otherwise the
/// supplied running statistics are treated as constants.
template <class T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, bool training,
                  std::span<const T> running_mean, std::span<const T> running_var,
                  BatchStats<T>* stats = nullptr, T eps = T(1e-5)) {
  const Array<T>& xv = x.value();
  if (xv.rank() != 3) throw ShapeError("batch_norm: expected (B,C,L), got " + to_string(xv.shape()));
  const std::size_t B = xv.dim(0), C = xv.dim(1), L = xv.dim(2);
  if (gamma.value().shape() != Shape{C} || beta.value().shape() != Shape{C}) {
    throw ShapeError("batch_norm: affine parameters must have shape (" + std::to_string(C) + ")");
  }
  const std::size_t n = B * L;
  std::vector<T> mu(C), inv_std(C), var(C);
  const T* xs = xv.data();
  if (training) {
    for (std::size_t c = 0; c < C; ++c) {
      T s = 0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t l = 0; l < L; ++l) s += xs[(b * C + c) * L + l];
      mu[c] = s / static_cast<T>(n);
      T v = 0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t l = 0; l < L; ++l) {
          const T d = xs[(b * C + c) * L + l] - mu[c];
          v += d * d;
        }
      var[c] = v / static_cast<T>(n);
    }
    if (stats) *stats = BatchStats<T>{mu, var, n};
  } else {
    if (running_mean.size() != C || running_var.size() != C) {
      throw ShapeError("batch_norm: running statistics size mismatch");
    }
    std::copy(running_mean.begin(), running_mean.end(), mu.begin());
    std::copy(running_var.begin(), running_var.end(), var.begin());
  }
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + eps);

  Array<T> out(xv.shape());
  Array<T> xhat(xv.shape());
  {
    T* o = out.mutable_data();
    T* h = xhat.mutable_data();
    const T* gs = gamma.value().data();
    const T* bs = beta.value().data();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t l = 0; l < L; ++l) {
          const std::size_t k = (b * C + c) * L + l;
          h[k] = (xs[k] - mu[c]) * inv_std[c];
          o[k] = gs[c] * h[k] + bs[c];
        }
  }
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  const Array<T> gv = gamma.value();
  return x.tape->record(
      std::move(out), {ix, ig, ib},
      [=](Tape<T>& t, std::span<const T> g) {
        auto gx = t.grad_buffer(ix);
        auto gg = t.grad_buffer(ig);
        auto gb = t.grad_buffer(ib);
        const T* h = xhat.data();
        const T* gam = gv.data();
        for (std::size_t c = 0; c < C; ++c) {
          T sg = 0, sgh = 0;
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t l = 0; l < L; ++l) {
              const std::size_t k = (b * C + c) * L + l;
              sg += g[k];
              sgh += g[k] * h[k];
            }
          if (!gg.empty()) gg[c] += sgh;
          if (!gb.empty()) gb[c] += sg;
          if (gx.empty()) continue;
          const T scale = gam[c] * inv_std[c];
          const T m1 = sg / static_cast<T>(n);
          const T m2 = sgh / static_cast<T>(n);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t l = 0; l < L; ++l) {
              const std::size_t k = (b * C + c) * L + l;
              gx[k] += training ? scale * (g[k] - m1 - h[k] * m2) : scale * g[k];
            }
        }
      },
      "batch_norm");
}

}  // namespace ecgbench::diff
