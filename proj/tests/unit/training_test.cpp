#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ecgbench/training/train.hpp"
#include "support/primitive_cases.hpp"

namespace {

using namespace ecgbench;
using namespace ecgbench::training;
using diff::Array;
using diff::Shape;
namespace fs = std::filesystem;

std::vector<data::LabelVector> labels_with(std::size_t n, std::size_t positives, std::size_t cls) {
  std::vector<data::LabelVector> out(n, data::LabelVector{});
  for (std::size_t i = 0; i < positives; ++i) out[i][cls] = 1;
  return out;
}

TEST(PosWeights, WorkedCases) {
  EXPECT_EQ(pos_weights(labels_with(100, 20, 0)).w[0], 4.0);
  EXPECT_EQ(pos_weights(labels_with(1001, 1, 3)).w[3], 100.0);
  auto w = pos_weights(labels_with(10, 0, 0));
  EXPECT_EQ(w.w[0], 10.0);
  EXPECT_EQ(w.n, 10u);
  EXPECT_THROW(pos_weights({}), std::invalid_argument);
}

TEST(WeightedBce, WorkedCases) {
  auto loss = [](double z, double y, double w) {
    diff::Tape<double> t;
    std::vector<double> ws(1, w);
    return weighted_bce(t.constant(Array<double>(Shape{1, 1}, z)), Array<double>(Shape{1, 1}, y), ws).value().item();
  };
  EXPECT_NEAR(loss(0, 1, 1), 0.693147180559945, 1e-12);
  EXPECT_NEAR(loss(0, 1, 4), 2.772588722239781, 1e-12);
  EXPECT_NEAR(loss(-50, 1, 1), 50.0, 1e-12);
  EXPECT_TRUE(std::isfinite(loss(800, 0, 1)));
}

struct BceCase {
  Array<double> z, y;
  std::vector<double> w;
};

BceCase random_bce(std::uint64_t seed, std::size_t B = 6) {
  std::mt19937_64 rng(seed);
  BceCase c{ecgbench::testing::random_array(rng, {B, 19}, -20.0, 20.0), Array<double>(Shape{B, 19}), {}};
  std::bernoulli_distribution coin(0.4);
  for (auto& v : c.y.mutable_values()) v = coin(rng);
  std::uniform_real_distribution<double> wd(0.5, 100.0);
  for (int k = 0; k < 19; ++k) c.w.push_back(wd(rng));
  return c;
}

TEST(WeightedBce, MatchesNaiveFormula) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto c = random_bce(seed);
    double naive = 0;
    for (std::size_t k = 0; k < c.z.size(); ++k) {
      const double z = c.z[k], y = c.y[k], w = c.w[k % 19];
      naive += (1 - y) * std::log(1 + std::exp(z)) + y * w * std::log(1 + std::exp(-z));
    }
    naive /= static_cast<double>(c.z.size());
    diff::Tape<double> t;
    EXPECT_NEAR(weighted_bce(t.constant(c.z), c.y, c.w).value().item(), naive, 1e-10);
  }
}

TEST(WeightedBce, UnitWeightsGiveBinaryCrossEntropy) {
  auto c = random_bce(3);
  for (auto& v : c.z.mutable_values()) v /= 4;  // keep log(1 - sigma) well conditioned
  std::vector<double> ones(19, 1.0);
  double bce = 0;
  for (std::size_t k = 0; k < c.z.size(); ++k) {
    const double p = 1 / (1 + std::exp(-c.z[k]));
    bce -= c.y[k] * std::log(p) + (1 - c.y[k]) * std::log(1 - p);
  }
  diff::Tape<double> t;
  EXPECT_NEAR(weighted_bce(t.constant(c.z), c.y, ones).value().item(), bce / c.z.size(), 1e-12);
}

TEST(WeightedBce, NonNegativeWithSignedGradient) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto c = random_bce(seed);
    diff::Tape<double> t;
    auto z = t.leaf(c.z);
    auto loss = weighted_bce(z, c.y, c.w);
    EXPECT_GE(loss.value().item(), 0.0);
    t.backward(loss);
    auto g = t.grad(z);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (c.y[k] == 1) EXPECT_LT(g[k], 0.0);
      if (c.y[k] == 0) EXPECT_GT(g[k], 0.0);
    }
  }
}

TEST(WeightedBce, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = random_bce(seed, 3);
    for (auto& v : c.z.mutable_values()) v /= 5;
    auto r = diff::grad_check(
        [&](diff::Tape<double>&, diff::Var<double> z) { return weighted_bce(z, c.y, c.w); }, c.z, 1e-5, 1e-4);
    EXPECT_TRUE(r.passed) << r.worst_rel_error;
  }
}

TEST(WeightedBce, RejectsNonFiniteLogitsAndShapeMismatch) {
  diff::Tape<double> t;
  std::vector<double> w(19, 1.0);
  Array<double> z(Shape{1, 19}, 0.0);
  z.mutable_data()[4] = std::nan("");
  EXPECT_THROW(weighted_bce(t.constant(z), Array<double>(Shape{1, 19}), w), std::domain_error);
  EXPECT_THROW(weighted_bce(t.constant(Array<double>(Shape{2, 19})), Array<double>(Shape{1, 19}), w),
               diff::ShapeError);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Array<double> th(Shape{1}, 0.3);
  AdamSlot<double> s;
  AdamWConfig cfg;
  adamw_step(th, Array<double>(Shape{1}, 1.0), s, cfg);
  EXPECT_NEAR(th[0], 0.3 - 7e-4 / (1 + 1e-8), 1e-15);
  EXPECT_EQ(s.t, 1);
}

TEST(AdamW, ZeroGradientLeavesParametersAndUpdateIgnoresMagnitude) {
  AdamWConfig cfg;
  Array<double> a(Shape{3}, std::vector<double>{1.0, -2.0, 1e6});
  AdamSlot<double> s;
  adamw_step(a, Array<double>(Shape{3}, 0.0), s, cfg);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(a[1], -2.0);
  EXPECT_EQ(a[2], 1e6);
  Array<double> small(Shape{1}, 0.001), big(Shape{1}, 1000.0);
  AdamSlot<double> s1, s2;
  for (int i = 0; i < 5; ++i) {
    adamw_step(small, Array<double>(Shape{1}, 0.5), s1, cfg);
    adamw_step(big, Array<double>(Shape{1}, 0.5), s2, cfg);
  }
  EXPECT_NEAR(0.001 - small[0], 1000.0 - big[0], 1e-12);
}

TEST(AdamW, QuadraticDescendsMonotonically) {
  Array<double> th(Shape{1}, 1.0);
  AdamSlot<double> s;
  // scalar simulation of the same recurrence
  double x = 1.0, m = 0, v = 0;
  double prev = 1.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2 * x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 7e-4 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    adamw_step(th, Array<double>(Shape{1}, 2 * th[0]), s, AdamWConfig{});
    EXPECT_LT(std::abs(th[0]), prev);
    prev = std::abs(th[0]);
    EXPECT_NEAR(th[0], x, 1e-14);
  }
}

TEST(AdamW, ShapeMismatchRejected) {
  Array<double> th(Shape{2}, 0.0);
  AdamSlot<double> s;
  EXPECT_THROW(adamw_step(th, Array<double>(Shape{3}, 0.0), s, AdamWConfig{}), diff::ShapeError);
}

TEST(Predict, ThresholdBoundaryAndMonotonicity) {
  Array<double> z(Shape{1, 3}, std::vector<double>{0.0, -3.0, 2.0});
  auto p = predict_logits(z);
  EXPECT_EQ(p.scores.v[0], 0.5);
  EXPECT_EQ(p.decisions.v[0], 1);
  EXPECT_NEAR(p.scores.v[1], 0.0474258731775668, 1e-12);
  EXPECT_EQ(p.decisions.v[1], 0);
  std::mt19937_64 rng(1);
  auto r = ecgbench::testing::random_array(rng, {20, 19}, -5.0, 5.0);
  auto q = predict_logits(r);
  for (std::size_t k = 0; k < r.size(); ++k) EXPECT_EQ(q.decisions.v[k], r[k] >= 0 ? 1 : 0);
}

// Tiny separable problem at the miniature input size (2 leads x 30 samples).
data::SliceDataset toy_partition(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 0.3);
  data::SliceDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    data::Slice s;
    s.record_id = "toy" + std::to_string(i);
    s.x = Array<float>(Shape{2, 30});
    const std::size_t cls = i % 3;
    s.labels[cls] = 1;
    for (std::size_t t = 0; t < 30; ++t) {
      const double base = std::sin(0.2 * static_cast<double>((cls + 1) * t));
      s.x.mutable_data()[t] = static_cast<float>(base + noise(rng));
      s.x.mutable_data()[30 + t] = static_cast<float>((cls == 2 ? 1.0 : -0.5) + noise(rng));
    }
    ds.slices.push_back(std::move(s));
  }
  return ds;
}

TrainConfig toy_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch = 8;
  cfg.optim.lr = 1e-2;
  cfg.seed = 5;
  return cfg;
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
  const auto mcfg = models::ModelConfig::miniature(models::Paradigm::resnet1d);
  auto res = train<float>(mcfg, toy_partition(24, 1), toy_partition(6, 2), toy_config(0));
  EXPECT_TRUE(res.log.entries.empty());
  const auto init = models::init_params<float>(mcfg, 5);
  for (const auto& n : init.names)
    for (std::size_t i = 0; i < init.at(n).size(); ++i) ASSERT_EQ(res.best.at(n)[i], init.at(n)[i]);
}

TEST(Train, RunLogIsBitIdenticalAcrossRuns) {
  for (auto p : models::kParadigms) {
    const auto mcfg = models::ModelConfig::miniature(p);
    auto a = train<float>(mcfg, toy_partition(24, 1), toy_partition(6, 2), toy_config(3));
    auto b = train<float>(mcfg, toy_partition(24, 1), toy_partition(6, 2), toy_config(3));
    EXPECT_EQ(format_runlog(a.log), format_runlog(b.log)) << models::to_string(p);
    ASSERT_EQ(a.log.entries.size(), 3u);
    EXPECT_EQ(a.log.entries.back().epoch, 3u);
  }
}

TEST(Train, LossFallsAndBestEpochHasHighestValidationF1) {
  const auto mcfg = models::ModelConfig::miniature(models::Paradigm::resnet1d);
  auto res = train<float>(mcfg, toy_partition(48, 1), toy_partition(12, 2), toy_config(30));
  const auto& e = res.log.entries;
  EXPECT_LT(e.back().train_loss, e.front().train_loss);
  double best = -1;
  std::size_t best_epoch = 0;
  for (const auto& x : e)
    if (x.val_macro_f1 > best) {
      best = x.val_macro_f1;
      best_epoch = x.epoch;
    }
  EXPECT_EQ(res.log.best_epoch, best_epoch);
  auto report = evaluate(res.best, toy_partition(12, 2));
  EXPECT_DOUBLE_EQ(report.macro.f1, best);
}

TEST(Train, NonFiniteInputAbortsWithPosition) {
  const auto mcfg = models::ModelConfig::miniature(models::Paradigm::bilstm);
  auto bad = toy_partition(24, 1);
  for (auto& s : bad.slices) s.x.mutable_data()[3] = std::nanf("");
  try {
    train<float>(mcfg, bad, toy_partition(6, 2), toy_config(2));
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.epoch, 1u);
    EXPECT_EQ(e.batch, 0u);
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos);
  }
}

TEST(Train, LeadMismatchAndBadConfigRejected) {
  const auto mcfg = models::ModelConfig::miniature(models::Paradigm::resnet1d, 3);
  EXPECT_THROW(train<float>(mcfg, toy_partition(8, 1), toy_partition(4, 2), toy_config(1)), std::invalid_argument);
  auto cfg = toy_config(1);
  cfg.threshold = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = toy_config(1);
  cfg.optim.lr = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Train, WeightsDependOnTrainingPartitionOnly) {
  auto tr = toy_partition(30, 1);
  auto w1 = pos_weights(tr.labels()).w;
  auto w2 = pos_weights(toy_partition(30, 1).labels()).w;
  EXPECT_EQ(w1, w2);
  EXPECT_EQ(w1[0], 2.0);
  EXPECT_EQ(w1[5], 30.0);
}

TEST(RunLogFile, RoundTripAndFormat) {
  RunLog log;
  log.meta = {{"seed", "7"}, {"config_hash", "00ff"}};
  log.entries = {{1, 0.5, 0.25, 0.1, 0}, {2, 0.25, 0.75, 0.05, 0}};
  log.best_epoch = 2;
  const auto path = fs::temp_directory_path() / "ecgbench_runlog_test.csv";
  write_runlog(log, path);
  EXPECT_EQ(format_runlog(log),
            "# seed: 7\n# config_hash: 00ff\n"
            "epoch,train_loss,val_macro_f1,val_hamming,seconds,best\n"
            "1,0.5,0.25,0.1,0.000,0\n2,0.25,0.75,0.05,0.000,1\n");
  auto back = read_runlog(path);
  EXPECT_EQ(back.meta, log.meta);
  EXPECT_EQ(back.best_epoch, 2u);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[1].val_macro_f1, 0.75);
}

}  // namespace
