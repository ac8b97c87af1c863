#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgbench/data/dataset.hpp"
#include "ecgbench/metrics/metrics.hpp"
#include "ecgbench/models.hpp"
#include "ecgbench/training/adamw.hpp"
#include "ecgbench/training/loss.hpp"
#include "ecgbench/training/runlog.hpp"

namespace ecgbench::training {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 64;
  AdamWConfig optim;
  double tau = kDefaultTau;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  bool record_time = false;
  std::size_t eval_batch = 256;

  void validate() const {
    if (!(optim.lr > 0)) throw std::invalid_argument("lr must be positive");
    if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("threshold must lie in (0, 1)");
    if (batch == 0) throw std::invalid_argument("batch must be positive");
    if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
  }
};

/// Raised when the loss or logits stop being finite.
struct TrainingDiverged : std::runtime_error {
  std::size_t epoch, batch;
  TrainingDiverged(std::size_t e, std::size_t b, const std::string& why)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(e) + ", batch " + std::to_string(b) + ": " +
                           why),
        epoch(e),
        batch(b) {}
};

/// Sigmoid scores and thresholded decisions (score >= threshold).
struct Prediction {
  metrics::Scores scores;
  metrics::Binary decisions;
};

template <class T>
Prediction predict_logits(const diff::Array<T>& logits, double threshold = 0.5) {
  Prediction out{metrics::Scores(logits.dim(0), logits.dim(1)), metrics::Binary(logits.dim(0), logits.dim(1))};
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double s = diff::detail::stable_sigmoid(static_cast<double>(logits[k]));
    out.scores.v[k] = s;
    out.decisions.v[k] = s >= threshold ? 1 : 0;
  }
  return out;
}

template <class T>
Prediction predict(const models::ModelParams<T>& p, const diff::Array<T>& x, double threshold = 0.5) {
  return predict_logits(models::infer(p, x), threshold);
}

/// Eval-mode prediction over a whole partition, in slice order.
template <class T>
Prediction predict(const models::ModelParams<T>& p, const data::SliceDataset& ds, double threshold = 0.5,
                   std::size_t chunk = 256) {
  Prediction out{metrics::Scores(ds.size(), data::kNumClasses), metrics::Binary(ds.size(), data::kNumClasses)};
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    idx.resize(std::min(chunk, ds.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    auto [x, y] = data::make_batch<T>(ds.slices, idx);
    auto part = predict(p, x, threshold);
    std::copy(part.scores.v.begin(), part.scores.v.end(), out.scores.v.begin() + start * data::kNumClasses);
    std::copy(part.decisions.v.begin(), part.decisions.v.end(), out.decisions.v.begin() + start * data::kNumClasses);
  }
  return out;
}

template <class T>
metrics::EvalReport evaluate(const models::ModelParams<T>& p, const data::SliceDataset& ds, double threshold = 0.5) {
  auto pred = predict(p, ds, threshold);
  const auto labels = ds.labels();
  return metrics::build_report(pred.scores, pred.decisions, metrics::from_labels(labels));
}

/// Parameters plus optimizer state; one call of `step` is one optimization step.
template <class T>
struct Trainer {
  models::ModelParams<T> params;
  AdamW<T> opt;
  std::vector<double> weights;
  Rng dropout;

  Trainer(models::ModelParams<T> p, std::vector<double> w, const AdamWConfig& cfg, std::uint64_t seed)
      : params(std::move(p)), weights(std::move(w)), dropout(substream(seed, "dropout")) {
    opt.cfg = cfg;
  }

  /// Train-mode forward, weighted loss, backward, AdamW update, then the
  /// batch-norm running statistics. Returns the batch loss.
  double step(const diff::Array<T>& x, const diff::Array<T>& y) {
    Tape<T> tape;
    models::Forward<T> f(tape, params, true, &dropout);
    auto logits = models::forward(f, tape.constant(x));
    auto loss = weighted_bce(logits, y, weights);
    const double value = static_cast<double>(loss.value().item());
    if (!std::isfinite(value)) throw std::domain_error("loss is " + std::to_string(value));
    tape.backward(loss);
    std::map<std::string, diff::Array<T>> grads;
    for (const auto& [name, v] : f.bound) grads.emplace(name, tape.grad(v));
    opt.step(params, grads);
    models::update_running_stats(params, f.bn_stats);
    return value;
  }
};

template <class T>
struct TrainResult {
  models::ModelParams<T> best;
  RunLog log;
};

/// Seeded shuffled mini-batches for `epochs` epochs; after each epoch the
/// validation macro-F1 decides whether the parameters become the new best.
/// Class weights are fitted on `train` only.
template <class T>
TrainResult<T> train(const models::ModelConfig& model_cfg, const data::SliceDataset& train_set,
                     const data::SliceDataset& val_set, const TrainConfig& cfg,
                     const std::function<void(const EpochEntry&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training partition");
  if (train_set.n_leads() != model_cfg.n_leads) {
    throw std::invalid_argument("train: model expects " + std::to_string(model_cfg.n_leads) + " leads, data has " +
                                std::to_string(train_set.n_leads()));
  }
  const auto labels = train_set.labels();
  Trainer<T> trainer(models::init_params<T>(model_cfg, cfg.seed), pos_weights(labels, cfg.tau).w, cfg.optim, cfg.seed);
  TrainResult<T> out{trainer.params, {}};
  Rng shuffle = substream(cfg.seed, "shuffle");
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  double best_f1 = -1;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    double loss_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch, ++batch_index) {
      const std::size_t n = std::min(cfg.batch, order.size() - start);
      std::span<const std::size_t> idx(order.data() + start, n);
      auto [x, y] = data::make_batch<T>(train_set.slices, idx);
      try {
        loss_sum += trainer.step(x, y) * static_cast<double>(n);
      } catch (const std::domain_error& e) {
        throw TrainingDiverged(epoch, batch_index, e.what());
      }
    }
    EpochEntry e;
    e.epoch = epoch;
    e.train_loss = loss_sum / static_cast<double>(order.size());
    if (val_set.size() > 0) {
      auto pred = predict(trainer.params, val_set, cfg.threshold, cfg.eval_batch);
      const auto y = metrics::from_labels(val_set.labels());
      e.val_macro_f1 = metrics::prf1(pred.decisions, y).macro.f1;
      e.val_hamming = metrics::hamming_loss(pred.decisions, y);
    }
    if (cfg.record_time) {
      e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    if (e.val_macro_f1 > best_f1) {
      best_f1 = e.val_macro_f1;
      out.best = trainer.params;
      out.log.best_epoch = epoch;
    }
    out.log.entries.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return out;
}

}  // namespace ecgbench::training
