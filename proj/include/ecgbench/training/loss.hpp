#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgbench/data/label_space.hpp"
#include "ecgbench/diffcore.hpp"

namespace ecgbench::training {

using diff::Array;
using diff::Shape;
using diff::Tape;
using diff::Var;

inline constexpr double kDefaultTau = 100.0;

/// Positive-class weights w_c = min((N - P_c) / max(1, P_c), tau).
struct ClassWeights {
  std::vector<double> w;
  double tau = kDefaultTau;
  std::size_t n = 0;
};

inline ClassWeights pos_weights(std::span<const data::LabelVector> train_labels, double tau = kDefaultTau) {
  if (train_labels.empty()) throw std::invalid_argument("pos_weights: no training labels");
  if (!(tau > 0)) throw std::invalid_argument("pos_weights: tau must be positive");
  ClassWeights cw;
  cw.tau = tau;
  cw.n = train_labels.size();
  cw.w.assign(data::kNumClasses, 0.0);
  for (std::size_t c = 0; c < data::kNumClasses; ++c) {
    double pos = 0;
    for (const auto& y : train_labels) pos += y[c];
    cw.w[c] = std::min((static_cast<double>(cw.n) - pos) / std::max(1.0, pos), tau);
  }
  return cw;
}

/// Mean over all (sample, class) cells of
///   (1 - y) log(1 + e^z) + y w_c log(1 + e^-z)
/// using the overflow-safe softplus. One fused tape node.
template <class T>
Var<T> weighted_bce(Var<T> z, const Array<T>& y, std::span<const double> w) {
  const Array<T>& zv = z.value();
  if (zv.rank() != 2 || y.shape() != zv.shape()) {
    throw diff::ShapeError("weighted_bce: logits " + diff::to_string(zv.shape()) + " vs labels " +
                           diff::to_string(y.shape()));
  }
  const std::size_t B = zv.dim(0), C = zv.dim(1);
  if (w.size() != C) throw diff::ShapeError("weighted_bce: " + std::to_string(w.size()) + " weights for " +
                                            std::to_string(C) + " classes");
  if (!zv.all_finite()) throw std::domain_error("weighted_bce: non-finite logits");
  const T* zs = zv.data();
  const T* ys = y.data();
  double total = 0;
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t c = 0; c < C; ++c) {
      const double zz = zs[i * C + c], yy = ys[i * C + c];
      total += (1 - yy) * diff::detail::stable_log1p_exp(zz) + yy * w[c] * diff::detail::stable_log1p_exp(-zz);
    }
  const double cells = static_cast<double>(B * C);
  std::vector<double> wv(w.begin(), w.end());
  const int iz = z.id;
  return z.tape->record(
      Array<T>(Shape{1}, static_cast<T>(total / cells)), {iz},
      [=](Tape<T>& t, std::span<const T> g) {
        auto gz = t.grad_buffer(iz);
        const T* zs = zv.data();
        const T* ys = y.data();
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t k = i * C + c;
            const double zz = zs[k], yy = ys[k];
            const double d = (1 - yy) * diff::detail::stable_sigmoid(zz) -
                             yy * wv[c] * diff::detail::stable_sigmoid(-zz);
            gz[k] += static_cast<T>(g[0] * d / cells);
          }
      },
      "weighted_bce");
}

}  // namespace ecgbench::training
