#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ecgbench/models/config.hpp"

namespace ecgbench::models {

struct Census {
  std::vector<std::pair<std::string, std::size_t>> arrays;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [k, v] : arrays) n += v;
    return n;
  }
  std::size_t of(const std::string& name) const {
    for (const auto& [k, v] : arrays)
      if (k == name) return v;
    return 0;
  }
};

/// Learnable element counts per array, from the layer formulas alone.
inline Census param_census(const ModelConfig& c) {
  Census out;
  auto put = [&](const std::string& n, std::size_t v) { out.arrays.emplace_back(n, v); };
  auto linear = [&](const std::string& n, std::size_t in, std::size_t o, bool bias = true) {
    put(n + ".w", in * o);
    if (bias) put(n + ".b", o);
  };
  auto norm = [&](const std::string& n, std::size_t d) {
    put(n + ".gamma", d);
    put(n + ".beta", d);
  };
  switch (c.paradigm) {
    case Paradigm::resnet1d: {
      put("stem.conv.w", c.widths[0] * c.n_leads * c.kernel);
      norm("stem.bn", c.widths[0]);
      std::size_t in = c.widths[0];
      for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t o = c.widths[s];
        for (std::size_t b = 0; b < c.blocks_per_stage; ++b) {
          const std::string n = "layer" + std::to_string(s + 1) + "." + std::to_string(b);
          put(n + ".conv1.w", o * in * c.kernel);
          norm(n + ".bn1", o);
          put(n + ".conv2.w", o * o * c.kernel);
          norm(n + ".bn2", o);
          if ((s > 0 && b == 0) || in != o) {
            put(n + ".down.conv.w", o * in);
            norm(n + ".down.bn", o);
          }
          in = o;
        }
      }
      linear("fc", in, c.n_classes);
      break;
    }
    case Paradigm::bilstm: {
      const std::size_t H = c.hidden;
      for (std::size_t l = 0; l < c.lstm_layers; ++l) {
        const std::size_t in = l == 0 ? c.n_leads : 2 * H;
        for (const char* dir : {"fwd", "bwd"}) {
          const std::string n = "lstm.l" + std::to_string(l) + "." + dir;
          put(n + ".wx", 4 * H * in);
          put(n + ".wh", 4 * H * H);
          put(n + ".b", 4 * H);
        }
      }
      linear("fc", 2 * H, c.n_classes);
      break;
    }
    case Paradigm::transformer: {
      const std::size_t d = c.d_model;
      linear("embed", c.patch * c.n_leads, d);
      for (std::size_t l = 0; l < c.tf_layers; ++l) {
        const std::string n = "block" + std::to_string(l);
        norm(n + ".ln1", d);
        for (const char* p : {".attn.q", ".attn.k", ".attn.v", ".attn.o"}) linear(n + p, d, d);
        norm(n + ".ln2", d);
        linear(n + ".ffn1", d, c.ffn);
        linear(n + ".ffn2", c.ffn, d);
      }
      norm("head.ln", d);
      linear("head.fc1", d, c.head_hidden);
      linear("head.fc2", c.head_hidden, c.n_classes);
      break;
    }
    case Paradigm::mamba2: {
      const std::size_t d = c.d_model, di = c.d_inner(), H = c.ssd_heads(), N = c.d_state;
      linear("embed", c.n_leads, d);
      for (std::size_t l = 0; l < c.mamba_layers; ++l) {
        const std::string n = "block" + std::to_string(l);
        norm(n + ".ln", d);
        linear(n + ".in_proj", d, 2 * di, false);
        put(n + ".conv.w", di * c.conv_kernel);
        put(n + ".conv.b", di);
        linear(n + ".ssd.dt", di, H);
        put(n + ".ssd.B.w", di * N);
        put(n + ".ssd.C.w", di * N);
        put(n + ".ssd.A_log", H);
        put(n + ".ssd.D", di);
        linear(n + ".out_proj", di, d, false);
      }
      linear("fc", d, c.n_classes);
      break;
    }
  }
  return out;
}

}  // namespace ecgbench::models
