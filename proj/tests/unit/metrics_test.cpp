#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ecgbench/metrics/report_io.hpp"
#include "support/metric_oracles.hpp"

namespace {

using namespace ecgbench::metrics;
using namespace ecgbench::testing;

Binary bin(std::size_t r, std::size_t c, std::vector<std::uint8_t> v) { return Binary(r, c, std::move(v)); }

void expect_same_or_both_nan(double a, double b, double tol, const std::string& what) {
  if (std::isnan(b)) {
    EXPECT_TRUE(std::isnan(a)) << what;
  } else {
    EXPECT_NEAR(a, b, tol) << what;
  }
}

TEST(Hamming, WorkedCases) {
  auto y = bin(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(hamming_loss(y, y), 0.0);
  EXPECT_EQ(hamming_loss(bin(2, 2, {1, 1, 0, 1}), y), 0.25);
  EXPECT_EQ(hamming_loss(bin(2, 3, {1, 1, 1, 0, 0, 0}), bin(2, 3, {0, 0, 0, 1, 1, 1})), 1.0);
  EXPECT_THROW(hamming_loss(bin(1, 2, {0, 0}), y), std::invalid_argument);
}

TEST(Prf, CountArithmetic) {
  // class column: TP at rows 0 and 1, FP at row 2, FN at row 3
  auto r = prf1(bin(4, 1, {1, 1, 1, 0}), bin(4, 1, {1, 1, 0, 1}));
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 2.0 / 3);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 2.0 / 3);
  EXPECT_DOUBLE_EQ(r.per_class[0].f1, 2.0 / 3);
}

TEST(Prf, PerfectPredictionsAndZeroDenominators) {
  auto y = bin(3, 2, {1, 0, 0, 1, 1, 0});
  auto r = prf1(y, y);
  EXPECT_EQ(r.micro.f1, 1.0);
  EXPECT_EQ(r.macro.precision, 1.0);
  auto none = prf1(bin(3, 2, {0, 0, 0, 0, 0, 0}), y);
  EXPECT_EQ(none.micro.precision, 0.0);
  EXPECT_EQ(none.macro.f1, 0.0);
}

TEST(Prf, SingleClassMicroEqualsMacro) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto m = random_metric_case(s);
    Binary d(m.labels.rows, 1), y(m.labels.rows, 1);
    for (std::size_t i = 0; i < y.rows; ++i) {
      d(i, 0) = m.decisions(i, 0);
      y(i, 0) = m.labels(i, 0);
    }
    y(0, 0) = 1;
    auto r = prf1(d, y);
    EXPECT_DOUBLE_EQ(r.micro.precision, r.macro.precision);
    EXPECT_DOUBLE_EQ(r.micro.recall, r.macro.recall);
    EXPECT_DOUBLE_EQ(r.micro.f1, r.macro.f1);
  }
}

TEST(Auc, WorkedCases) {
  Scores s(4, 1, {0.1, 0.4, 0.35, 0.8});
  auto y = bin(4, 1, {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(auc_roc(s, y).per_class[0], 0.75);
  EXPECT_DOUBLE_EQ(auc_roc(Scores(4, 1, {0.1, 0.2, 0.7, 0.8}), y).macro, 1.0);
  EXPECT_DOUBLE_EQ(auc_roc(Scores(4, 1, {0.3, 0.3, 0.3, 0.3}), y).micro, 0.5);
}

TEST(Auc, ColumnsWithoutBothLabelsAreSkipped) {
  Scores s(3, 3, {0.1, 0.5, 0.9, 0.7, 0.2, 0.3, 0.4, 0.8, 0.6});
  auto y = bin(3, 3, {1, 0, 1, 0, 0, 1, 1, 0, 1});
  auto r = auc_roc(s, y);
  EXPECT_FALSE(r.skipped[0]);
  EXPECT_TRUE(r.skipped[1]);
  EXPECT_TRUE(r.skipped[2]);
  EXPECT_TRUE(std::isnan(r.per_class[1]));
  EXPECT_DOUBLE_EQ(r.macro, r.per_class[0]);
  EXPECT_DOUBLE_EQ(r.micro, r.per_class[0]);
  EXPECT_THROW(auc_roc(Scores(1, 1, {std::nan("")}), bin(1, 1, {1})), std::invalid_argument);
}

TEST(Oracles, RandomInstancesMatchBruteForce) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto m = random_metric_case(seed);
    const auto tag = "seed " + std::to_string(seed);
    EXPECT_NEAR(hamming_loss(m.decisions, m.labels), naive_hamming(m.decisions, m.labels), 1e-12) << tag;
    auto prf = prf1(m.decisions, m.labels);
    auto mi = naive_micro_prf(m.decisions, m.labels);
    auto ma = naive_macro_prf(m.decisions, m.labels);
    EXPECT_NEAR(prf.micro.f1, mi.f1, 1e-12) << tag;
    EXPECT_NEAR(prf.micro.precision, mi.p, 1e-12) << tag;
    EXPECT_NEAR(prf.macro.recall, ma.r, 1e-12) << tag;
    EXPECT_NEAR(prf.macro.f1, ma.f1, 1e-12) << tag;
    for (std::size_t c = 0; c < m.labels.cols; ++c) {
      EXPECT_NEAR(prf.per_class[c].precision, naive_class_prf(m.decisions, m.labels, c).p, 1e-12) << tag;
    }
    auto auc = auc_roc(m.scores, m.labels);
    expect_same_or_both_nan(auc.micro, naive_micro_auc(m.scores, m.labels), 1e-12, tag);
    expect_same_or_both_nan(auc.macro, naive_macro_auc(m.scores, m.labels), 1e-12, tag);
    for (std::size_t c = 0; c < m.labels.cols; ++c)
      expect_same_or_both_nan(auc.per_class[c], naive_class_auc(m.scores, m.labels, c), 1e-12, tag);
  }
}

TEST(Properties, HammingIsOneMinusCellAccuracy) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto m = random_metric_case(seed);
    std::size_t right = 0;
    for (std::size_t k = 0; k < m.labels.v.size(); ++k) right += m.labels.v[k] == m.decisions.v[k];
    EXPECT_DOUBLE_EQ(hamming_loss(m.decisions, m.labels), 1.0 - static_cast<double>(right) / m.labels.v.size());
  }
}

TEST(Properties, AucInvariantUnderIncreasingTransform) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto m = random_metric_case(seed);
    Scores t = m.scores;
    for (auto& v : t.v) v = std::exp(3 * v) - 7;
    auto a = auc_roc(m.scores, m.labels), b = auc_roc(t, m.labels);
    expect_same_or_both_nan(a.micro, b.micro, 0.0, "micro");
    expect_same_or_both_nan(a.macro, b.macro, 0.0, "macro");
  }
}

TEST(Properties, ClassPermutationInvariance) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto m = random_metric_case(seed);
    std::vector<std::size_t> perm(m.labels.cols);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    Binary d(m.labels.rows, m.labels.cols), y(m.labels.rows, m.labels.cols);
    for (std::size_t i = 0; i < y.rows; ++i)
      for (std::size_t c = 0; c < y.cols; ++c) {
        d(i, c) = m.decisions(i, perm[c]);
        y(i, c) = m.labels(i, perm[c]);
      }
    auto a = prf1(m.decisions, m.labels), b = prf1(d, y);
    EXPECT_DOUBLE_EQ(a.micro.f1, b.micro.f1);
    EXPECT_NEAR(a.macro.f1, b.macro.f1, 1e-12);
  }
}

TEST(Report, SeventhClassAbsentIsSkipped) {
  std::mt19937_64 rng(4);
  const std::size_t n = 40;
  Scores s(n, 19);
  Binary y(n, 19), d(n, 19);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 19; ++c) {
      y(i, c) = c != 6 && (i + c) % 4 == 0;
      s(i, c) = u(rng);
      d(i, c) = s(i, c) > 0.5;
    }
  auto r = build_report(s, d, y);
  EXPECT_EQ(r.skipped_classes, std::vector<std::size_t>{7});
  EXPECT_TRUE(r.per_class[6].skipped);
  EXPECT_EQ(r.per_class[6].support, 0u);
  double f1 = 0, auc = 0;
  for (const auto& row : r.per_class)
    if (!row.skipped) {
      f1 += row.f1;
      auc += row.auc;
    }
  EXPECT_NEAR(r.macro.f1, f1 / 18, 1e-12);
  EXPECT_NEAR(r.macro.auc, auc / 18, 1e-12);
}

TEST(Report, PerfectPredictionsGiveHundredPercent) {
  Binary y(4, 19);
  Scores s(4, 19);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 19; ++c) {
      y(i, c) = (i + c) % 2;
      s(i, c) = y(i, c) ? 0.9 : 0.1;
    }
  auto r = build_report(s, y, y);
  EXPECT_TRUE(r.skipped_classes.empty());
  EXPECT_EQ(r.hamming, 0.0);
  EXPECT_EQ(aggregate_row("resnet1d", r), "resnet1d,0.0000,100.00,100.00,100.00,100.00,100.00,100.00,100.00,100.00");
  auto j = to_json(r, {{"seed", "3"}});
  EXPECT_EQ(j["seed"], "3");
  EXPECT_EQ(j["macro"]["f1"], 100.0);
  EXPECT_EQ(j["per_class"].size(), 19u);
}

TEST(Report, SerializationShapes) {
  Binary y(3, 19);
  Scores s(3, 19, 0.3);
  y(0, 0) = 1;
  y(1, 0) = 0;
  auto r = build_report(s, Binary(3, 19), y);
  auto j = to_json(r);
  EXPECT_TRUE(j["per_class"][0]["auc"].is_number());
  EXPECT_TRUE(j["per_class"][1]["auc"].is_null());
  EXPECT_EQ(j["skipped_classes"].size(), 18u);
  std::istringstream csv(per_class_csv(r, {{"config_hash", "abc"}}));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "# config_hash: abc");
  std::getline(csv, line);
  EXPECT_EQ(line, "class,precision,recall,f1,auc,support,skipped");
  std::getline(csv, line);
  EXPECT_EQ(line, "1,0.00,0.00,0.00,50.00,1,0");
  std::getline(csv, line);
  EXPECT_EQ(line, "2,0.00,0.00,0.00,,0,1");
  EXPECT_EQ(std::string(kAggregateHeader),
            "model,hamming,micro_p,micro_r,micro_f1,micro_auc,macro_p,macro_r,macro_f1,macro_auc");
}

}  // namespace
