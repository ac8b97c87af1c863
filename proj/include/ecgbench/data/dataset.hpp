#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgbench/data/manifest.hpp"
#include "ecgbench/data/normalizer.hpp"
#include "ecgbench/data/slicing.hpp"
#include "ecgbench/data/split.hpp"

namespace ecgbench::data {

/// One normalized partition. `norm` was fitted on exactly these slices.
struct SliceDataset {
  Partition partition = Partition::train;
  std::vector<Slice> slices;
  Normalizer norm;

  std::size_t size() const { return slices.size(); }
  std::size_t n_leads() const { return slices.empty() ? 0 : slices.front().n_leads(); }
  std::vector<LabelVector> labels() const {
    std::vector<LabelVector> out;
    out.reserve(slices.size());
    for (const auto& s : slices) out.push_back(s.labels);
    return out;
  }
};

/// Loads and slices every record of a record manifest, in manifest order.
inline std::vector<Slice> load_slices(const fs::path& manifest_path, std::vector<fs::path>* record_paths = nullptr) {
  const Manifest m = read_manifest(manifest_path);
  std::vector<Slice> out;
  for (const auto& e : m.entries) {
    const fs::path p = resolve(manifest_path, e.path);
    ECGRecord r;
    try {
      r = load_record(p);
    } catch (const std::exception& ex) {
      throw RecordError("unreadable record " + p.stem().string() + ": " + ex.what());
    }
    for (auto& s : slice_record(r)) {
      out.push_back(std::move(s));
      if (record_paths) record_paths->push_back(p);
    }
  }
  return out;
}

/// Splits raw slices 7:1:2 and normalizes each partition with its own
/// statistics. When `by_record` is set, all slices of a record share a
/// partition.
inline std::array<SliceDataset, 3> make_partitions(const std::vector<Slice>& slices, std::uint64_t seed,
                                                   bool by_record = false, std::vector<Partition>* assignment = nullptr) {
  std::vector<LabelVector> labels;
  std::vector<std::string> groups;
  for (const auto& s : slices) {
    labels.push_back(s.labels);
    groups.push_back(s.record_id);
  }
  const auto parts = by_record ? stratified_split(labels, seed, {}, std::span<const std::string>(groups))
                               : stratified_split(labels, seed);
  if (assignment) *assignment = parts;
  std::array<SliceDataset, 3> out;
  for (int j = 0; j < 3; ++j) out[j].partition = static_cast<Partition>(j);
  for (std::size_t i = 0; i < slices.size(); ++i) out[static_cast<int>(parts[i])].slices.push_back(slices[i]);
  for (auto& d : out) {
    if (d.slices.empty()) throw std::runtime_error(std::string("partition ") + to_string(d.partition) + " is empty");
    d.norm = fit_normalizer(d.slices);
    d.slices = normalize(d.slices, d.norm);
  }
  return out;
}

/// Plain-text normalizer: one `lead mean std` row per lead.
inline void save_normalizer(const Normalizer& n, const fs::path& path, const std::string& preamble = "") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write normalizer " + path.string());
  os << preamble << "lead\tmean\tstd\n";
  char buf[96];
  for (std::size_t l = 0; l < n.n_leads(); ++l) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", l, n.mean[l], n.std[l]);
    os << buf;
  }
}

inline Normalizer load_normalizer(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("missing normalizer file " + path.string() + "; run `ecgbench prep` first");
  }
  Normalizer n;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#' || line.rfind("lead", 0) == 0) continue;
    std::istringstream ls(line);
    std::size_t lead = 0;
    double mu = 0, sd = 0;
    if (!(ls >> lead >> mu >> sd) || lead != n.mean.size()) {
      throw std::runtime_error("malformed normalizer row in " + path.string() + ": " + line);
    }
    n.mean.push_back(mu);
    n.std.push_back(sd);
  }
  if (n.mean.empty()) throw std::runtime_error("empty normalizer file " + path.string());
  return n;
}

/// Stacks slices[idx] into x (B, n_leads, 300) and y (B, 19).
template <class T>
std::pair<diff::Array<T>, diff::Array<T>> make_batch(std::span<const Slice> slices, std::span<const std::size_t> idx) {
  if (idx.empty()) throw std::invalid_argument("make_batch: empty batch");
  const std::size_t leads = slices[idx[0]].n_leads();
  const std::size_t len = slices[idx[0]].x.dim(1);
  diff::Array<T> x(diff::Shape{idx.size(), leads, len});
  diff::Array<T> y(diff::Shape{idx.size(), kNumClasses});
  T* xp = x.mutable_data();
  T* yp = y.mutable_data();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Slice& s = slices[idx[b]];
    if (s.n_leads() != leads) throw std::invalid_argument("make_batch: mixed lead counts");
    const float* src = s.x.data();
    for (std::size_t i = 0; i < leads * len; ++i) xp[b * leads * len + i] = static_cast<T>(src[i]);
    for (std::size_t c = 0; c < kNumClasses; ++c) yp[b * kNumClasses + c] = static_cast<T>(s.labels[c]);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace ecgbench::data
