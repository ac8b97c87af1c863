#pragma once

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ecgbench/diffcore.hpp"
#include "ecgbench/models/config.hpp"
#include "ecgbench/util/rng.hpp"

namespace ecgbench::models {

using diff::Array;
using diff::Shape;
using diff::Tape;
using diff::Var;

/// Named arrays of one model. `names` fixes a stable order (creation order)
/// used by the census, the optimizer and the checkpoint payload. Buffers
/// (batch-norm running statistics) are state but not learnable.
template <class T>
struct ModelParams {
  ModelConfig config;
  std::vector<std::string> names;
  std::map<std::string, Array<T>> values;
  std::vector<std::string> buffer_names;
  std::map<std::string, Array<T>> buffers;

  void add(const std::string& name, Array<T> a) {
    if (!values.emplace(name, std::move(a)).second) throw std::logic_error("duplicate parameter " + name);
    names.push_back(name);
  }
  void add_buffer(const std::string& name, Array<T> a) {
    if (!buffers.emplace(name, std::move(a)).second) throw std::logic_error("duplicate buffer " + name);
    buffer_names.push_back(name);
  }
  const Array<T>& at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
  }
  Array<T>& at(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
  }
  const Array<T>& buffer(const std::string& name) const {
    auto it = buffers.find(name);
    if (it == buffers.end()) throw std::out_of_range("no buffer named " + name);
    return it->second;
  }
  Array<T>& buffer(const std::string& name) {
    auto it = buffers.find(name);
    if (it == buffers.end()) throw std::out_of_range("no buffer named " + name);
    return it->second;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : values) n += v.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& [k, v] : values)
      if (!v.all_finite()) return false;
    return true;
  }

  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    for (const auto& n : names) out.add(n, at(n).template cast<U>());
    for (const auto& n : buffer_names) out.add_buffer(n, buffer(n).template cast<U>());
    return out;
  }
};

/// Parameter construction with the initialization rules: fan-in uniform
/// weights, zero biases, unit/zero affine norms.
template <class T>
struct Initializer {
  ModelParams<T>& p;
  Rng rng;

  Array<T> uniform(Shape shape, double bound) {
    std::uniform_real_distribution<double> d(-bound, bound);
    Array<T> a(std::move(shape));
    for (auto& v : a.mutable_values()) v = static_cast<T>(d(rng));
    return a;
  }

  void weight(const std::string& name, Shape shape, std::size_t fan_in) {
    p.add(name, uniform(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in))));
  }
  void fill(const std::string& name, Shape shape, T value) { p.add(name, Array<T>(std::move(shape), value)); }

  /// y = x W + b with W (in, out).
  void linear(const std::string& name, std::size_t in, std::size_t out, bool bias = true) {
    weight(name + ".w", {in, out}, in);
    if (bias) fill(name + ".b", {out}, T(0));
  }
  void conv(const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    weight(name + ".w", {out, in, k}, in * k);
  }
  void batch_norm(const std::string& name, std::size_t c) {
    fill(name + ".gamma", {c}, T(1));
    fill(name + ".beta", {c}, T(0));
    p.add_buffer(name + ".running_mean", Array<T>(Shape{c}, T(0)));
    p.add_buffer(name + ".running_var", Array<T>(Shape{c}, T(1)));
  }
  void layer_norm(const std::string& name, std::size_t d) {
    fill(name + ".gamma", {d}, T(1));
    fill(name + ".beta", {d}, T(0));
  }
};

/// State of one forward pass: binds parameters to tape nodes on first use and
/// collects batch-norm statistics for the running-average update.
template <class T>
struct Forward {
  Tape<T>& tape;
  const ModelParams<T>& params;
  bool train = false;
  Rng* dropout_rng = nullptr;
  // parameters become leaves (gradients wanted) or constants
  bool trainable = true;
  std::map<std::string, Var<T>> bound;
  std::vector<std::pair<std::string, diff::BatchStats<T>>> bn_stats;
  std::vector<Array<T>>* attention_probe = nullptr;

  Forward(Tape<T>& t, const ModelParams<T>& p, bool train_mode = false, Rng* rng = nullptr, bool grads = true)
      : tape(t), params(p), train(train_mode), dropout_rng(rng), trainable(grads) {}

  Var<T> operator()(const std::string& name) {
    auto it = bound.find(name);
    if (it != bound.end()) return it->second;
    const Array<T>& a = params.at(name);
    Var<T> v = trainable ? tape.leaf(a) : tape.constant(a);
    bound.emplace(name, v);
    return v;
  }
};

/// x (..., in) times W (in, out) plus optional b (out).
template <class T>
Var<T> linear(Forward<T>& f, Var<T> x, const std::string& name, bool bias = true) {
  const Shape in_shape = x.shape();
  const std::size_t in = in_shape.back();
  Var<T> w = f(name + ".w");
  const std::size_t out = w.dim(1);
  Var<T> flat = in_shape.size() == 2 ? x : diff::reshape(x, Shape{x.size() / in, in});
  Var<T> y = diff::matmul(flat, w);
  if (bias) y = diff::add(y, f(name + ".b"));
  if (in_shape.size() == 2) return y;
  Shape out_shape = in_shape;
  out_shape.back() = out;
  return diff::reshape(y, out_shape);
}

/// Inverted dropout; identity outside training or when p == 0.
template <class T>
Var<T> dropout(Forward<T>& f, Var<T> x, double p) {
  if (!f.train || p <= 0.0) return x;
  if (!f.dropout_rng) throw std::logic_error("dropout in train mode needs an rng");
  const double keep = 1.0 - p;
  std::bernoulli_distribution d(keep);
  Array<T> mask(x.shape());
  for (auto& m : mask.mutable_values()) m = d(*f.dropout_rng) ? static_cast<T>(1.0 / keep) : T(0);
  return diff::mul(x, f.tape.constant(std::move(mask)));
}

template <class T>
Var<T> batch_norm(Forward<T>& f, Var<T> x, const std::string& name) {
  const auto& rm = f.params.buffer(name + ".running_mean");
  const auto& rv = f.params.buffer(name + ".running_var");
  diff::BatchStats<T> stats;
  Var<T> y = diff::batch_norm(x, f(name + ".gamma"), f(name + ".beta"), f.train, rm.values(), rv.values(),
                              f.train ? &stats : nullptr);
  if (f.train) f.bn_stats.emplace_back(name, std::move(stats));
  return y;
}

template <class T>
Var<T> layer_norm(Forward<T>& f, Var<T> x, const std::string& name) {
  return diff::layer_norm(x, f(name + ".gamma"), f(name + ".beta"));
}

inline constexpr double kBatchNormMomentum = 0.1;

/// running <- (1-m) running + m batch; the variance uses the unbiased batch
/// estimate.
template <class T>
void update_running_stats(ModelParams<T>& p, const std::vector<std::pair<std::string, diff::BatchStats<T>>>& stats,
                          double momentum = kBatchNormMomentum) {
  for (const auto& [name, s] : stats) {
    auto& rm = p.buffer(name + ".running_mean");
    auto& rv = p.buffer(name + ".running_var");
    T* m = rm.mutable_data();
    T* v = rv.mutable_data();
    const double unbias = s.count > 1 ? static_cast<double>(s.count) / static_cast<double>(s.count - 1) : 1.0;
    for (std::size_t c = 0; c < s.mean.size(); ++c) {
      m[c] = static_cast<T>((1 - momentum) * m[c] + momentum * s.mean[c]);
      v[c] = static_cast<T>((1 - momentum) * v[c] + momentum * s.var[c] * unbias);
    }
  }
}

template <class T>
void check_input(const ModelConfig& cfg, const Var<T>& x, const char* model) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != cfg.n_leads || s[2] != cfg.seq_len) {
    throw diff::ShapeError(std::string(model) + ": expected input (B," + std::to_string(cfg.n_leads) + "," +
                           std::to_string(cfg.seq_len) + "), got " + diff::to_string(s));
  }
}

}  // namespace ecgbench::models
