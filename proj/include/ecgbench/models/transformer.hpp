#pragma once

#include <cmath>
#include <string>

#include "ecgbench/models/params.hpp"

namespace ecgbench::models {

/// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same angle).
template <class T>
Array<T> positional_encoding(std::size_t positions, std::size_t d) {
  Array<T> pe(Shape{positions, d});
  T* o = pe.mutable_data();
  for (std::size_t pos = 0; pos < positions; ++pos)
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      o[pos * d + i] = static_cast<T>(std::sin(angle));
      if (i + 1 < d) o[pos * d + i + 1] = static_cast<T>(std::cos(angle));
    }
  return pe;
}

template <class T>
void transformer_init(Initializer<T>& init, const ModelConfig& c) {
  const std::size_t d = c.d_model;
  init.linear("embed", c.patch * c.n_leads, d);
  for (std::size_t l = 0; l < c.tf_layers; ++l) {
    const std::string n = "block" + std::to_string(l);
    init.layer_norm(n + ".ln1", d);
    for (const char* proj : {".attn.q", ".attn.k", ".attn.v", ".attn.o"}) init.linear(n + proj, d, d);
    init.layer_norm(n + ".ln2", d);
    init.linear(n + ".ffn1", d, c.ffn);
    init.linear(n + ".ffn2", c.ffn, d);
  }
  init.layer_norm("head.ln", d);
  init.linear("head.fc1", d, c.head_hidden);
  init.linear("head.fc2", c.head_hidden, c.n_classes);
}

/// (B, leads, L) -> (B, L/patch, patch*leads); each patch row lists lead 0's
/// samples first, then lead 1's, and so on.
template <class T>
Var<T> patchify(Var<T> x, std::size_t patch) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  if (L % patch != 0) {
    throw diff::ShapeError("patchify: length " + std::to_string(L) + " not divisible by patch " + std::to_string(patch));
  }
  Var<T> h = diff::reshape(x, Shape{B, C, L / patch, patch});
  h = diff::permute(h, {0, 2, 1, 3});
  return diff::reshape(h, Shape{B, L / patch, C * patch});
}

/// Multi-head scaled dot-product self-attention over x (B, N, d).
template <class T>
Var<T> self_attention(Forward<T>& f, Var<T> x, const std::string& n, std::size_t head_dim, double drop) {
  const std::size_t B = x.dim(0), N = x.dim(1), d = x.dim(2), H = d / head_dim;
  auto heads = [&](Var<T> v) {
    v = diff::permute(diff::reshape(v, Shape{B, N, H, head_dim}), {0, 2, 1, 3});
    return diff::reshape(v, Shape{B * H, N, head_dim});
  };
  Var<T> q = heads(linear(f, x, n + ".q"));
  Var<T> k = heads(linear(f, x, n + ".k"));
  Var<T> v = heads(linear(f, x, n + ".v"));
  Var<T> scores = diff::scale(diff::bmm(q, k, false, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim))));
  Var<T> attn = diff::softmax(scores);
  if (f.attention_probe) f.attention_probe->push_back(attn.value());
  attn = dropout(f, attn, drop);
  Var<T> ctx = diff::reshape(diff::bmm(attn, v), Shape{B, H, N, head_dim});
  ctx = diff::reshape(diff::permute(ctx, {0, 2, 1, 3}), Shape{B, N, d});
  return linear(f, ctx, n + ".o");
}

template <class T>
Var<T> transformer_forward(Forward<T>& f, Var<T> x) {
  const ModelConfig& c = f.params.config;
  check_input(c, x, "transformer");
  Var<T> h = linear(f, patchify(x, c.patch), "embed");
  h = diff::add(h, f.tape.constant(positional_encoding<T>(c.n_patches(), c.d_model)));
  for (std::size_t l = 0; l < c.tf_layers; ++l) {
    const std::string n = "block" + std::to_string(l);
    h = diff::add(h, self_attention(f, layer_norm(f, h, n + ".ln1"), n + ".attn", c.head_dim, c.tf_dropout));
    Var<T> ff = diff::relu(linear(f, layer_norm(f, h, n + ".ln2"), n + ".ffn1"));
    ff = dropout(f, linear(f, ff, n + ".ffn2"), c.tf_dropout);
    h = diff::add(h, ff);
  }
  Var<T> pooled = layer_norm(f, diff::mean(h, 1), "head.ln");
  return linear(f, diff::relu(linear(f, pooled, "head.fc1")), "head.fc2");
}

}  // namespace ecgbench::models
