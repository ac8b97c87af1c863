#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ecgbench/data/label_space.hpp"
#include "ecgbench/metrics/metrics.hpp"

namespace ecgbench::metrics {

using Meta = std::vector<std::pair<std::string, std::string>>;

inline std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string percent(double rate) { return fixed(100.0 * rate, 2); }

/// `# key: value` lines that open every text artifact.
inline std::string meta_preamble(const Meta& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += "# " + k + ": " + v + "\n";
  return out;
}

inline nlohmann::ordered_json to_json(const EvalReport& r, const Meta& meta = {}) {
  auto pct = [](double v) -> nlohmann::ordered_json {
    if (std::isnan(v)) return nullptr;
    return 100.0 * v;
  };
  auto block = [&](const Block& b) {
    nlohmann::ordered_json j;
    j["precision"] = pct(b.precision);
    j["recall"] = pct(b.recall);
    j["f1"] = pct(b.f1);
    j["auc_roc"] = pct(b.auc);
    return j;
  };
  nlohmann::ordered_json j;
  for (const auto& [k, v] : meta) j[k] = v;
  j["n"] = r.n;
  j["hamming"] = r.hamming;
  j["micro"] = block(r.micro);
  j["macro"] = block(r.macro);
  j["skipped_classes"] = r.skipped_classes;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_class) {
    nlohmann::ordered_json row;
    row["class"] = c.cls;
    if (c.cls >= 1 && c.cls <= data::kNumClasses) row["name"] = std::string(data::kLabelSpace[c.cls - 1].name);
    row["precision"] = pct(c.precision);
    row["recall"] = pct(c.recall);
    row["f1"] = pct(c.f1);
    row["auc"] = pct(c.auc);
    row["support"] = c.support;
    row["skipped"] = c.skipped;
    j["per_class"].push_back(row);
  }
  return j;
}

/// class,precision,recall,f1,auc,support,skipped; percentages with 2 decimals,
/// empty auc where undefined.
inline std::string per_class_csv(const EvalReport& r, const Meta& meta = {}) {
  std::string out = meta_preamble(meta) + "class,precision,recall,f1,auc,support,skipped\n";
  for (const auto& c : r.per_class) {
    out += std::to_string(c.cls) + "," + percent(c.precision) + "," + percent(c.recall) + "," + percent(c.f1) + "," +
           percent(c.auc) + "," + std::to_string(c.support) + "," + (c.skipped ? "1" : "0") + "\n";
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

/// Writes <stem>.json and <stem>.per_class.csv.
inline void write_report(const EvalReport& r, const std::filesystem::path& stem, const Meta& meta = {}) {
  write_text(stem.string() + ".json", to_json(r, meta).dump(2) + "\n");
  write_text(stem.string() + ".per_class.csv", per_class_csv(r, meta));
}

inline constexpr const char* kAggregateHeader = "model,hamming,micro_p,micro_r,micro_f1,micro_auc,macro_p,macro_r,macro_f1,macro_auc";

/// One aggregate row; hamming with 4 decimals, rates as percentages with 2.
inline std::string aggregate_row(const std::string& model, const EvalReport& r) {
  return model + "," + fixed(r.hamming, 4) + "," + percent(r.micro.precision) + "," + percent(r.micro.recall) + "," +
         percent(r.micro.f1) + "," + percent(r.micro.auc) + "," + percent(r.macro.precision) + "," +
         percent(r.macro.recall) + "," + percent(r.macro.f1) + "," + percent(r.macro.auc);
}

}  // namespace ecgbench::metrics
