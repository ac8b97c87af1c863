#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ecgbench/diffcore/tape.hpp"

namespace ecgbench::diff {

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  /// Coordinates probed across all inputs; 0 probes every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  /// A failing coordinate whose one-sided differences disagree with each other
  /// while the analytic value matches one side straddles a ReLU/max kink; it is
  /// counted in `kinks` instead of the error.
  bool skip_kinks = false;
};

struct GradCheckReport {
  bool passed = true;
  double worst_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;
};

using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+h) - f(x-h)) / 2h. Relative error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckReport grad_check(const ScalarFn& f, const std::vector<Array<double>>& inputs,
                                  const GradCheckOptions& opts = {}) {
  auto evaluate = [&](const std::vector<Array<double>>& xs) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& x : xs) vars.push_back(tape.leaf(x));
    return f(tape, vars).value().item();
  };

  std::vector<Array<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x));
    Var<double> y = f(tape, vars);
    tape.backward(y);
    for (auto v : vars) analytic.push_back(tape.grad(v));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) coords.emplace_back(k, i);
  if (opts.max_coords != 0 && coords.size() > opts.max_coords) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  std::vector<Array<double>> probe = inputs;
  for (auto [k, i] : coords) {
    const double x0 = inputs[k][i];
    probe[k].mutable_data()[i] = x0 + opts.h;
    const double fp = evaluate(probe);
    probe[k].mutable_data()[i] = x0 - opts.h;
    const double fm = evaluate(probe);
    probe[k].mutable_data()[i] = x0;
    const double num = (fp - fm) / (2.0 * opts.h);
    const double ana = analytic[k][i];
    auto rel_err = [](double a, double n) {
      const double r = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
      return std::isnan(r) ? std::numeric_limits<double>::infinity() : r;
    };
    double rel = rel_err(ana, num);
    if (opts.skip_kinks && rel > opts.tol) {
      const double f0 = evaluate(probe);
      const double right = (fp - f0) / opts.h, left = (f0 - fm) / opts.h;
      if (rel_err(left, right) > 2 * opts.tol && std::min(rel_err(ana, left), rel_err(ana, right)) <= opts.tol) {
        ++report.kinks;
        continue;
      }
    }
    ++report.checked;
    if (report.checked == 1 || rel > report.worst_rel_error) {
      report.worst_rel_error = rel;
      report.worst_input = k;
      report.worst_index = i;
      report.worst_analytic = ana;
      report.worst_numeric = num;
    }
  }
  report.passed = report.worst_rel_error <= opts.tol;
  return report;
}

/// Single-input form.
inline GradCheckReport grad_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                                  const Array<double>& x, double h, double tol) {
  return grad_check(
      [&](Tape<double>& t, const std::vector<Var<double>>& v) { return f(t, v[0]); }, {x},
      GradCheckOptions{h, tol, 0, 0});
}

}  // namespace ecgbench::diff
