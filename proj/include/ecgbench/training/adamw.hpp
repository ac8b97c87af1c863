#pragma once

#include <cmath>
#include <map>
#include <string>

#include "ecgbench/diffcore.hpp"
#include "ecgbench/models/params.hpp"

namespace ecgbench::training {

struct AdamWConfig {
  double lr = 7e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <class T>
struct AdamSlot {
  diff::Array<T> m, v;
  long t = 0;
};

/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
/// theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta).
template <class T>
void adamw_step(diff::Array<T>& param, const diff::Array<T>& grad, AdamSlot<T>& s, const AdamWConfig& cfg) {
  if (param.shape() != grad.shape()) {
    throw diff::ShapeError("adamw_step: param " + diff::to_string(param.shape()) + " vs grad " +
                           diff::to_string(grad.shape()));
  }
  if (s.t == 0) {
    s.m = diff::Array<T>(param.shape(), T(0));
    s.v = diff::Array<T>(param.shape(), T(0));
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.t));
  T* th = param.mutable_data();
  T* m = s.m.mutable_data();
  T* v = s.v.mutable_data();
  const T* g = grad.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double gi = g[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double upd = (mi / c1) / (std::sqrt(vi / c2) + cfg.eps) + cfg.weight_decay * th[i];
    th[i] = static_cast<T>(th[i] - cfg.lr * upd);
  }
}

/// One slot per named parameter array.
template <class T>
struct AdamW {
  AdamWConfig cfg;
  std::map<std::string, AdamSlot<T>> slots;

  void step(models::ModelParams<T>& p, const std::map<std::string, diff::Array<T>>& grads) {
    for (const auto& n : p.names) {
      auto it = grads.find(n);
      if (it == grads.end()) continue;
      adamw_step(p.at(n), it->second, slots[n], cfg);
    }
  }
};

}  // namespace ecgbench::training
