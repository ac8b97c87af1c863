#pragma once

#include <string>

#include "ecgbench/models/params.hpp"

namespace ecgbench::models {

namespace detail {

inline std::string block_name(std::size_t stage, std::size_t block) {
  return "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
}

/// First block of every stage after the first downsamples and projects.
inline bool block_projects(std::size_t stage, std::size_t block) { return stage > 0 && block == 0; }

}  // namespace detail

template <class T>
void resnet1d_init(Initializer<T>& init, const ModelConfig& c) {
  const std::size_t stem = c.widths[0];
  init.conv("stem.conv", stem, c.n_leads, c.kernel);
  init.batch_norm("stem.bn", stem);
  std::size_t in = stem;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t out = c.widths[s];
    for (std::size_t b = 0; b < c.blocks_per_stage; ++b) {
      const std::string n = detail::block_name(s, b);
      init.conv(n + ".conv1", out, in, c.kernel);
      init.batch_norm(n + ".bn1", out);
      init.conv(n + ".conv2", out, out, c.kernel);
      init.batch_norm(n + ".bn2", out);
      if (detail::block_projects(s, b) || in != out) {
        init.conv(n + ".down.conv", out, in, 1);
        init.batch_norm(n + ".down.bn", out);
      }
      in = out;
    }
  }
  init.linear("fc", in, c.n_classes);
}

/// conv-BN-relu-conv-BN plus shortcut, then relu.
template <class T>
Var<T> basic_block(Forward<T>& f, Var<T> x, const std::string& n, std::size_t stride, std::size_t kernel) {
  const std::size_t pad = kernel / 2;
  Var<T> h = diff::conv1d(x, f(n + ".conv1.w"), stride, pad);
  h = diff::relu(batch_norm(f, h, n + ".bn1"));
  h = diff::conv1d(h, f(n + ".conv2.w"), 1, pad);
  h = batch_norm(f, h, n + ".bn2");
  Var<T> shortcut = x;
  if (f.params.values.count(n + ".down.conv.w")) {
    shortcut = batch_norm(f, diff::conv1d(x, f(n + ".down.conv.w"), stride, 0), n + ".down.bn");
  }
  return diff::relu(diff::add(h, shortcut));
}

/// Trunk output (B, widths[3], L_out) before pooling.
template <class T>
Var<T> resnet1d_features(Forward<T>& f, Var<T> x) {
  const ModelConfig& c = f.params.config;
  check_input(c, x, "resnet1d");
  Var<T> h = diff::conv1d(x, f("stem.conv.w"), 2, c.kernel / 2);
  h = diff::relu(batch_norm(f, h, "stem.bn"));
  h = diff::max_pool1d(h, 3, 2, 1);
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t b = 0; b < c.blocks_per_stage; ++b) {
      h = basic_block(f, h, detail::block_name(s, b), detail::block_projects(s, b) ? 2 : 1, c.kernel);
    }
  return h;
}

template <class T>
Var<T> resnet1d_forward(Forward<T>& f, Var<T> x) {
  Var<T> h = diff::mean(resnet1d_features(f, x), 2);
  return linear(f, h, "fc");
}

}  // namespace ecgbench::models
