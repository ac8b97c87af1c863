#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgbench/data/label_space.hpp"

namespace ecgbench::metrics {

/// Dense row-major N x C matrix.
template <class T>
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<T> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), v(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), v(std::move(values)) {
    if (v.size() != r * c) throw std::invalid_argument("Matrix: value count does not match shape");
  }

  T operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
  T& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
};

using Binary = Matrix<std::uint8_t>;
using Scores = Matrix<double>;

inline Binary from_labels(std::span<const data::LabelVector> labels) {
  Binary m(labels.size(), data::kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t c = 0; c < data::kNumClasses; ++c) m(i, c) = labels[i][c] ? 1 : 0;
  return m;
}

namespace detail {

template <class A, class B>
void same_shape(const Matrix<A>& a, const Matrix<B>& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument(std::string(what) + ": shape " + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols));
  }
}

inline double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

}  // namespace detail

/// Fraction of cells where decision and label disagree, over all columns.
inline double hamming_loss(const Binary& decisions, const Binary& labels) {
  detail::same_shape(decisions, labels, "hamming_loss");
  if (labels.v.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < labels.v.size(); ++k) wrong += (decisions.v[k] != 0) != (labels.v[k] != 0);
  return static_cast<double>(wrong) / static_cast<double>(labels.v.size());
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct Prf {
  double precision = 0, recall = 0, f1 = 0;

  static Prf of(const Counts& c) {
    Prf r;
    r.precision = detail::ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    r.recall = detail::ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    r.f1 = detail::ratio(2 * r.precision * r.recall, r.precision + r.recall);
    return r;
  }
};

/// All three averagings at once. A class is skipped from the macro mean when
/// it has no positive label in the evaluated set.
struct PrfResult {
  Prf micro, macro;
  std::vector<Prf> per_class;
  std::vector<Counts> counts;
  std::vector<bool> skipped;
};

inline PrfResult prf1(const Binary& decisions, const Binary& labels) {
  detail::same_shape(decisions, labels, "prf1");
  PrfResult out;
  out.counts.assign(labels.cols, {});
  for (std::size_t i = 0; i < labels.rows; ++i)
    for (std::size_t c = 0; c < labels.cols; ++c) {
      const bool d = decisions(i, c) != 0, y = labels(i, c) != 0;
      auto& k = out.counts[c];
      k.tp += d && y;
      k.fp += d && !y;
      k.fn += !d && y;
    }
  Counts total;
  std::size_t kept = 0;
  for (std::size_t c = 0; c < labels.cols; ++c) {
    const auto& k = out.counts[c];
    total.tp += k.tp;
    total.fp += k.fp;
    total.fn += k.fn;
    out.per_class.push_back(Prf::of(k));
    out.skipped.push_back(k.tp + k.fn == 0);
    if (!out.skipped.back()) {
      ++kept;
      out.macro.precision += out.per_class.back().precision;
      out.macro.recall += out.per_class.back().recall;
      out.macro.f1 += out.per_class.back().f1;
    }
  }
  out.micro = Prf::of(total);
  if (kept > 0) {
    out.macro.precision /= static_cast<double>(kept);
    out.macro.recall /= static_cast<double>(kept);
    out.macro.f1 /= static_cast<double>(kept);
  }
  return out;
}

/// Mann-Whitney AUC of (score, label) pairs with ties counted 1/2.
/// NaN when there is no positive or no negative.
inline double auc_of(std::vector<std::pair<double, bool>> cells) {
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double correct = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    double gp = 0, gn = 0;
    for (; j < cells.size() && cells[j].first == cells[i].first; ++j) (cells[j].second ? gp : gn) += 1;
    correct += gp * neg + 0.5 * gp * gn;
    pos += gp;
    neg += gn;
    i = j;
  }
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  return correct / (pos * neg);
}

struct AucResult {
  double micro = std::numeric_limits<double>::quiet_NaN();
  double macro = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_class;  // NaN where skipped
  std::vector<bool> skipped;
};

/// Per-class AUC skips columns lacking a positive or a negative; micro is the
/// AUC of all cells from non-skipped columns.
inline AucResult auc_roc(const Scores& scores, const Binary& labels) {
  detail::same_shape(scores, labels, "auc_roc");
  for (double s : scores.v)
    if (!std::isfinite(s)) throw std::invalid_argument("auc_roc: non-finite score");
  AucResult out;
  std::vector<std::pair<double, bool>> pooled, column;
  double sum = 0;
  std::size_t kept = 0;
  for (std::size_t c = 0; c < labels.cols; ++c) {
    column.clear();
    for (std::size_t i = 0; i < labels.rows; ++i) column.emplace_back(scores(i, c), labels(i, c) != 0);
    const double a = auc_of(column);
    out.per_class.push_back(a);
    out.skipped.push_back(std::isnan(a));
    if (std::isnan(a)) continue;
    sum += a;
    ++kept;
    pooled.insert(pooled.end(), column.begin(), column.end());
  }
  if (kept > 0) {
    out.macro = sum / static_cast<double>(kept);
    out.micro = auc_of(std::move(pooled));
  }
  return out;
}

struct ClassRow {
  std::size_t cls = 0;  // 1-based
  double precision = 0, recall = 0, f1 = 0;
  double auc = std::numeric_limits<double>::quiet_NaN();
  std::size_t support = 0;
  bool skipped = false;
};

struct Block {
  double precision = 0, recall = 0, f1 = 0;
  double auc = std::numeric_limits<double>::quiet_NaN();
};

/// Rates are fractions in [0, 1]; formatting converts to percentages.
struct EvalReport {
  std::size_t n = 0;
  double hamming = 0;
  Block micro, macro;
  std::vector<ClassRow> per_class;
  std::vector<std::size_t> skipped_classes;  // 1-based, zero positives in labels
};

/// Classes with zero positives are skipped: kept as rows, left out of every
/// macro mean and of the pooled micro AUC.
inline EvalReport build_report(const Scores& scores, const Binary& decisions, const Binary& labels) {
  detail::same_shape(scores, labels, "build_report");
  detail::same_shape(decisions, labels, "build_report");
  EvalReport r;
  r.n = labels.rows;
  r.hamming = hamming_loss(decisions, labels);
  const auto prf = prf1(decisions, labels);
  const auto auc = auc_roc(scores, labels);
  r.micro = {prf.micro.precision, prf.micro.recall, prf.micro.f1, auc.micro};
  r.macro = {prf.macro.precision, prf.macro.recall, prf.macro.f1, auc.macro};
  for (std::size_t c = 0; c < labels.cols; ++c) {
    ClassRow row;
    row.cls = c + 1;
    row.precision = prf.per_class[c].precision;
    row.recall = prf.per_class[c].recall;
    row.f1 = prf.per_class[c].f1;
    row.auc = auc.per_class[c];
    row.support = prf.counts[c].tp + prf.counts[c].fn;
    row.skipped = prf.skipped[c];
    if (row.skipped) r.skipped_classes.push_back(row.cls);
    r.per_class.push_back(row);
  }
  return r;
}

}  // namespace ecgbench::metrics
