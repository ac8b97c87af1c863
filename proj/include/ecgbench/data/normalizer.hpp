#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ecgbench/data/slicing.hpp"

namespace ecgbench::data {

inline constexpr double kStdFloor = 1e-8;

/// Per-lead z-score statistics of one partition.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t n_leads() const { return mean.size(); }
};

/// Population mean/std per lead over every slice and time point.
inline Normalizer fit_normalizer(std::span<const Slice> slices) {
  if (slices.empty()) throw std::invalid_argument("fit_normalizer: empty partition");
  const std::size_t leads = slices.front().n_leads();
  std::vector<double> sum(leads, 0.0), sq(leads, 0.0);
  std::size_t count = 0;
  for (const auto& s : slices) {
    if (s.n_leads() != leads) throw std::invalid_argument("fit_normalizer: mixed lead counts");
    const std::size_t len = s.x.dim(1);
    for (std::size_t l = 0; l < leads; ++l)
      for (std::size_t i = 0; i < len; ++i) sum[l] += s.x[l * len + i];
    count += len;
  }
  Normalizer n{std::vector<double>(leads), std::vector<double>(leads)};
  for (std::size_t l = 0; l < leads; ++l) n.mean[l] = sum[l] / static_cast<double>(count);
  // second pass about the mean for accuracy
  for (const auto& s : slices) {
    const std::size_t len = s.x.dim(1);
    for (std::size_t l = 0; l < leads; ++l)
      for (std::size_t i = 0; i < len; ++i) {
        const double d = s.x[l * len + i] - n.mean[l];
        sq[l] += d * d;
      }
  }
  for (std::size_t l = 0; l < leads; ++l) {
    n.std[l] = std::max(std::sqrt(sq[l] / static_cast<double>(count)), kStdFloor);
  }
  return n;
}

inline Slice normalize(const Slice& s, const Normalizer& n) {
  if (s.n_leads() != n.n_leads()) {
    throw std::invalid_argument("normalizer has " + std::to_string(n.n_leads()) +
                                " leads, slice has " + std::to_string(s.n_leads()));
  }
  Slice out = s;
  float* x = out.x.mutable_data();
  const std::size_t len = s.x.dim(1);
  for (std::size_t l = 0; l < n.n_leads(); ++l)
    for (std::size_t i = 0; i < len; ++i)
      x[l * len + i] = static_cast<float>((s.x[l * len + i] - n.mean[l]) / n.std[l]);
  return out;
}

inline std::vector<Slice> normalize(std::span<const Slice> slices, const Normalizer& n) {
  std::vector<Slice> out;
  out.reserve(slices.size());
  for (const auto& s : slices) out.push_back(normalize(s, n));
  return out;
}

}  // namespace ecgbench::data
