#pragma once

#include <string>
#include <vector>

#include "ecgbench/data/record.hpp"

namespace ecgbench::data {

inline constexpr std::size_t kWindowSamples = 1500;  // 3 s at 500 Hz
inline constexpr std::size_t kDecimation = 5;
inline constexpr std::size_t kSliceLength = kWindowSamples / kDecimation;  // 300

struct Slice {
  std::string record_id;
  std::size_t window = 0;
  diff::Array<float> x;  // (n_leads, 300)
  LabelVector labels{};

  std::size_t n_leads() const { return x.dim(0); }
};

/// Keeps every 5th sample (indices 0, 5, ..., 1495); no anti-alias filter.
template <class T>
diff::Array<T> downsample(const diff::Array<T>& window) {
  if (window.rank() != 2 || window.dim(1) != kWindowSamples) {
    throw diff::ShapeError("downsample expects (n_leads, 1500), got " +
                           diff::to_string(window.shape()));
  }
  const std::size_t leads = window.dim(0);
  diff::Array<T> out(diff::Shape{leads, kSliceLength});
  T* o = out.mutable_data();
  const T* x = window.data();
  for (std::size_t l = 0; l < leads; ++l)
    for (std::size_t i = 0; i < kSliceLength; ++i)
      o[l * kSliceLength + i] = x[l * kWindowSamples + i * kDecimation];
  return out;
}

inline std::size_t window_count(const ECGRecord& r) { return r.n_samples() / kWindowSamples; }

/// Non-overlapping 1500-sample windows, trailing remainder dropped, each
/// decimated to 300 samples.
inline std::vector<Slice> slice_record(const ECGRecord& r) {
  const std::size_t leads = static_cast<std::size_t>(r.n_leads);
  const std::size_t T = r.n_samples();
  std::vector<Slice> out;
  const std::size_t n = window_count(r);
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    diff::Array<float> window(diff::Shape{leads, kWindowSamples});
    float* dst = window.mutable_data();
    const float* src = r.samples.data();
    for (std::size_t l = 0; l < leads; ++l)
      std::copy_n(src + l * T + w * kWindowSamples, kWindowSamples, dst + l * kWindowSamples);
    out.push_back(Slice{r.record_id, w, downsample(window), r.labels});
  }
  return out;
}

}  // namespace ecgbench::data
