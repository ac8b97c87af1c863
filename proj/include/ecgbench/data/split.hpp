#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgbench/data/label_space.hpp"
#include "ecgbench/util/rng.hpp"

namespace ecgbench::data {

enum class Partition { train = 0, val = 1, test = 2 };

inline constexpr std::array<const char*, 3> kPartitionNames{"train", "val", "test"};

inline const char* to_string(Partition p) { return kPartitionNames[static_cast<int>(p)]; }

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// Largest-remainder rounding of `ratios` applied to `n` units.
inline std::array<std::size_t, 3> partition_targets(std::size_t n, const SplitRatios& r) {
  const std::array<double, 3> ratio{r.train, r.val, r.test};
  const double total = ratio[0] + ratio[1] + ratio[2];
  std::array<std::size_t, 3> out{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int j = 0; j < 3; ++j) {
    const double exact = static_cast<double>(n) * ratio[j] / total;
    out[j] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[j] = exact - static_cast<double>(out[j]);
    assigned += out[j];
  }
  while (assigned < n) {
    int best = 0;
    for (int j = 1; j < 3; ++j)
      if (frac[j] > frac[best] + 1e-12) best = j;
    ++out[best];
    frac[best] = -1.0;
    ++assigned;
  }
  return out;
}

namespace detail {

/// Hill-climbs on the squared gap between each partition's positive share and
/// the global share, per label, plus a penalty for a partition left without a
/// positive it is owed. Only equal-sized units are swapped, so partition sizes
/// never change.
inline void refine_by_swaps(const std::vector<LabelVector>& unit_labels,
                            const std::vector<std::vector<std::size_t>>& units, std::vector<int>& assigned, Rng& rng) {
  const std::size_t nu = units.size();
  std::array<double, 3> size{};
  std::array<std::array<double, kNumClasses>, 3> pos{};
  std::array<double, kNumClasses> total{};
  double n = 0;
  for (std::size_t u = 0; u < nu; ++u) {
    const double w = static_cast<double>(units[u].size());
    size[assigned[u]] += w;
    n += w;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      if (unit_labels[u][c]) {
        pos[assigned[u]][c] += w;
        total[c] += w;
      }
  }
  auto cell = [&](int j, std::size_t c, double p) {
    if (size[j] <= 0) return 0.0;
    const double share = total[c] / n;
    const double gap = p / size[j] - share;
    const bool owed = total[c] * size[j] / n >= 1.0;
    return gap * gap + (owed && p < 0.5 ? 1.0 : 0.0);
  };
  std::uniform_int_distribution<std::size_t> pick(0, nu - 1);
  const std::size_t trials = 40 * nu;
  std::size_t since_gain = 0;
  for (std::size_t t = 0; t < trials && since_gain < 8 * nu; ++t) {
    const std::size_t u = pick(rng), v = pick(rng);
    const int ju = assigned[u], jv = assigned[v];
    if (ju == jv || units[u].size() != units[v].size()) {
      ++since_gain;
      continue;
    }
    const double w = static_cast<double>(units[u].size());
    double delta = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const int d = int(unit_labels[v][c]) - int(unit_labels[u][c]);  // change for ju
      if (d == 0) continue;
      delta += cell(ju, c, pos[ju][c] + d * w) - cell(ju, c, pos[ju][c]);
      delta += cell(jv, c, pos[jv][c] - d * w) - cell(jv, c, pos[jv][c]);
    }
    if (delta < -1e-15) {
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const int d = int(unit_labels[v][c]) - int(unit_labels[u][c]);
        pos[ju][c] += d * w;
        pos[jv][c] -= d * w;
      }
      std::swap(assigned[u], assigned[v]);
      since_gain = 0;
    } else {
      ++since_gain;
    }
  }
}

}  // namespace detail

/// Iterative multi-label stratification. Labels are visited rarest-first (by
/// remaining positives); each unit carrying that label goes to the partition
/// with the largest remaining demand for the label, ties broken by larger
/// remaining capacity and then by partition index. Partition capacities are
/// the rounded 7:1:2 targets, so sizes are exact. A swap refinement then
/// evens out per-label shares left uneven by the greedy pass.
///
/// `groups`, when given, keeps all slices sharing a group id (e.g. a record)
/// in one partition; capacities then count groups rather than slices.
inline std::vector<Partition> stratified_split(std::span<const LabelVector> labels,
                                               std::uint64_t seed, const SplitRatios& ratios = {},
                                               std::optional<std::span<const std::string>> groups = std::nullopt) {
  const std::size_t n = labels.size();
  if (n < 10) throw std::invalid_argument("stratified_split needs at least 10 slices, got " + std::to_string(n));

  // units: indices of members
  std::vector<std::vector<std::size_t>> units;
  if (groups) {
    if (groups->size() != n) throw std::invalid_argument("stratified_split: group list size mismatch");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, fresh] = index.emplace((*groups)[i], units.size());
      if (fresh) units.emplace_back();
      units[it->second].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) units.push_back({i});
  }
  std::vector<LabelVector> unit_labels(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (auto i : units[u])
      for (std::size_t c = 0; c < kNumClasses; ++c) unit_labels[u][c] |= labels[i][c];
  }

  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = substream(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);

  const std::array<double, 3> ratio{ratios.train, ratios.val, ratios.test};
  const double rsum = ratio[0] + ratio[1] + ratio[2];
  auto capacity_sz = partition_targets(units.size(), ratios);
  std::array<double, 3> capacity{};
  for (int j = 0; j < 3; ++j) capacity[j] = static_cast<double>(capacity_sz[j]);

  std::array<std::size_t, kNumClasses> remaining{};
  for (const auto& lv : unit_labels)
    for (std::size_t c = 0; c < kNumClasses; ++c) remaining[c] += lv[c];
  std::array<std::array<double, kNumClasses>, 3> demand{};
  for (int j = 0; j < 3; ++j)
    for (std::size_t c = 0; c < kNumClasses; ++c)
      demand[j][c] = static_cast<double>(remaining[c]) * ratio[j] / rsum;

  std::vector<int> assigned(units.size(), -1);
  std::size_t left = units.size();

  auto place = [&](std::size_t u, int j) {
    assigned[u] = j;
    capacity[j] -= 1.0;
    --left;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!unit_labels[u][c]) continue;
      demand[j][c] -= 1.0;
      --remaining[c];
    }
  };

  while (left > 0) {
    int label = -1;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (remaining[c] == 0) continue;
      if (label < 0 || remaining[c] < remaining[static_cast<std::size_t>(label)]) label = static_cast<int>(c);
    }
    if (label < 0) {
      // units without any positive label
      for (auto u : order) {
        if (assigned[u] >= 0) continue;
        int best = -1;
        for (int j = 0; j < 3; ++j)
          if (capacity[j] > 0.5 && (best < 0 || capacity[j] > capacity[best])) best = j;
        place(u, best);
      }
      break;
    }
    const auto c = static_cast<std::size_t>(label);
    for (auto u : order) {
      if (assigned[u] >= 0 || !unit_labels[u][c]) continue;
      int best = -1;
      for (int j = 0; j < 3; ++j) {
        if (capacity[j] < 0.5) continue;
        if (best < 0 || demand[j][c] > demand[best][c] ||
            (demand[j][c] == demand[best][c] && capacity[j] > capacity[best])) {
          best = j;
        }
      }
      place(u, best);
    }
  }

  detail::refine_by_swaps(unit_labels, units, assigned, rng);

  std::vector<Partition> out(n);
  for (std::size_t u = 0; u < units.size(); ++u)
    for (auto i : units[u]) out[i] = static_cast<Partition>(assigned[u]);
  return out;
}

}  // namespace ecgbench::data
