#pragma once

#include <cmath>
#include <random>
#include <string>

#include "ecgbench/models/ssd.hpp"

namespace ecgbench::models {

template <class T>
void mamba2_init(Initializer<T>& init, const ModelConfig& c) {
  const std::size_t d = c.d_model, di = c.d_inner(), H = c.ssd_heads(), N = c.d_state;
  init.linear("embed", c.n_leads, d);
  for (std::size_t l = 0; l < c.mamba_layers; ++l) {
    const std::string n = "block" + std::to_string(l);
    init.layer_norm(n + ".ln", d);
    init.linear(n + ".in_proj", d, 2 * di, false);
    init.weight(n + ".conv.w", {di, c.conv_kernel}, c.conv_kernel);
    init.fill(n + ".conv.b", {di}, T(0));
    init.weight(n + ".ssd.dt.w", {di, H}, di);
    // dt = softplus(bias) starts log-uniform in [1e-3, 1e-1]
    Array<T> dt_b(Shape{H});
    std::uniform_real_distribution<double> ud(std::log(1e-3), std::log(1e-1));
    for (auto& v : dt_b.mutable_values()) {
      const double dt = std::exp(ud(init.rng));
      v = static_cast<T>(dt + std::log(-std::expm1(-dt)));
    }
    init.p.add(n + ".ssd.dt.b", std::move(dt_b));
    init.weight(n + ".ssd.B.w", {di, N}, di);
    init.weight(n + ".ssd.C.w", {di, N}, di);
    Array<T> a_log(Shape{H});
    std::uniform_real_distribution<double> ua(0.0, std::log(16.0));
    for (auto& v : a_log.mutable_values()) v = static_cast<T>(ua(init.rng));
    init.p.add(n + ".ssd.A_log", std::move(a_log));
    init.fill(n + ".ssd.D", {di}, T(1));
    init.linear(n + ".out_proj", di, d, false);
  }
  init.linear("fc", d, c.n_classes);
}

/// Stream entering the scan: depthwise causal conv (left pad K-1) plus silu,
/// (B, L, d_inner) in and out.
template <class T>
Var<T> causal_conv_silu(Forward<T>& f, Var<T> xs, const std::string& n) {
  const std::size_t K = f.params.at(n + ".conv.w").dim(1);
  Var<T> h = diff::permute(xs, {0, 2, 1});
  h = diff::depthwise_conv1d(h, f(n + ".conv.w"), K - 1, 0, f(n + ".conv.b"));
  return diff::silu(diff::permute(h, {0, 2, 1}));
}

/// Residual block on (B, L, d_model). `sequential` swaps in the reference scan.
template <class T>
Var<T> mamba2_block(Forward<T>& f, Var<T> x, const std::string& n, bool sequential = false) {
  const ModelConfig& c = f.params.config;
  const std::size_t di = c.d_inner();
  Var<T> zx = linear(f, layer_norm(f, x, n + ".ln"), n + ".in_proj", false);
  Var<T> z = diff::slice(zx, 2, 0, di);
  Var<T> u = causal_conv_silu(f, diff::slice(zx, 2, di, di), n);
  const auto in = ssd_inputs(f, u, n + ".ssd");
  Var<T> y = sequential ? ssd_scan_sequential(in, u) : ssd_scan_chunked(in, u, c.chunk);
  y = diff::mul(y, diff::silu(z));
  return diff::add(x, linear(f, y, n + ".out_proj", false));
}

template <class T>
Var<T> mamba2_forward(Forward<T>& f, Var<T> x, bool sequential = false) {
  const ModelConfig& c = f.params.config;
  check_input(c, x, "mamba2");
  Var<T> h = linear(f, diff::permute(x, {0, 2, 1}), "embed");
  for (std::size_t l = 0; l < c.mamba_layers; ++l) h = mamba2_block(f, h, "block" + std::to_string(l), sequential);
  Var<T> pooled = dropout(f, diff::mean(h, 1), c.mamba_dropout);
  return linear(f, pooled, "fc");
}

}  // namespace ecgbench::models
