#pragma once

#include "ecgbench/models/bilstm.hpp"
#include "ecgbench/models/census.hpp"
#include "ecgbench/models/checkpoint.hpp"
#include "ecgbench/models/config.hpp"
#include "ecgbench/models/mamba2.hpp"
#include "ecgbench/models/params.hpp"
#include "ecgbench/models/resnet1d.hpp"
#include "ecgbench/models/ssd.hpp"
#include "ecgbench/models/transformer.hpp"

namespace ecgbench::models {

template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams<T> p;
  p.config = cfg;
  Initializer<T> init{p, substream(seed, "init")};
  switch (cfg.paradigm) {
    case Paradigm::resnet1d: resnet1d_init(init, cfg); break;
    case Paradigm::bilstm: bilstm_init(init, cfg); break;
    case Paradigm::transformer: transformer_init(init, cfg); break;
    case Paradigm::mamba2: mamba2_init(init, cfg); break;
  }
  return p;
}

/// Logits (B, n_classes) for x (B, n_leads, seq_len).
template <class T>
Var<T> forward(Forward<T>& f, Var<T> x) {
  switch (f.params.config.paradigm) {
    case Paradigm::resnet1d: return resnet1d_forward(f, x);
    case Paradigm::bilstm: return bilstm_forward(f, x);
    case Paradigm::transformer: return transformer_forward(f, x);
    case Paradigm::mamba2: return mamba2_forward(f, x);
  }
  throw std::logic_error("unknown paradigm");
}

/// Eval-mode logits without gradient bookkeeping.
template <class T>
Array<T> infer(const ModelParams<T>& p, const Array<T>& x) {
  Tape<T> tape;
  Forward<T> f(tape, p, false, nullptr, false);
  return forward(f, tape.constant(x)).value();
}

}  // namespace ecgbench::models
