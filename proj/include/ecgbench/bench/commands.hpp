#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecgbench/data/dataset.hpp"
#include "ecgbench/data/synth.hpp"
#include "ecgbench/metrics/report_io.hpp"
#include "ecgbench/models.hpp"
#include "ecgbench/training/train.hpp"
#include "ecgbench/util/rng.hpp"

namespace ecgbench::bench {

namespace fs = std::filesystem;

using Meta = std::vector<std::pair<std::string, std::string>>;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Config hash, seed and toolkit version, in that order.
inline Meta provenance(const std::string& canonical_config, std::uint64_t seed) {
  return {{"config_hash", hex64(fnv1a(canonical_config))},
          {"seed", std::to_string(seed)},
          {"version", std::string(kToolkitVersion)}};
}

inline std::string preamble(const Meta& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += "# " + k + ": " + v + "\n";
  return out;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

inline std::string shortest(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- synth ----

struct SynthSpec {
  data::SynthConfig gen;
  fs::path out;
  data::RecordLayout layout = data::RecordLayout::two_file;
};

/// Writes records under <out>/records and returns <out>/manifest.txt.
inline fs::path cmd_synth(const SynthSpec& spec) {
  spec.gen.validate();
  const auto records = data::synth_generate(spec.gen);
  ensure_dir(spec.out / "records");
  const fs::path manifest_path = spec.out / "manifest.txt";
  data::Manifest m;
  for (const auto& [k, v] : provenance("synth " + spec.gen.describe(), spec.gen.seed)) m.set(k, v);
  m.set("generator", spec.gen.describe());
  m.set("records", std::to_string(records.size()));
  for (const auto& r : records) {
    const fs::path p = data::save_record(r, spec.out / "records" / r.record_id, spec.layout);
    m.entries.push_back({data::relative_entry(manifest_path, p), std::nullopt});
  }
  data::write_manifest(m, manifest_path);
  return manifest_path;
}

// ---- prep ----

struct PrepSpec {
  fs::path manifest;
  fs::path out;
  std::uint64_t seed = 0;
  bool by_record = false;
};

struct PrepResult {
  fs::path dataset;  // index manifest naming the three partitions
  std::array<std::size_t, 3> n_slices{};
  std::array<std::array<std::size_t, data::kNumClasses>, 3> positives{};
  std::vector<int> absent_classes;  // 1-based, no positive anywhere
};

inline std::string file_digest(const fs::path& p) { return hex64(fnv1a(data::detail::read_file(p))); }

inline std::string prep_summary_csv(const PrepResult& r, const Meta& meta) {
  std::string out = preamble(meta);
  std::string absent;
  for (int c : r.absent_classes) absent += (absent.empty() ? "" : ",") + std::to_string(c);
  out += "# absent_classes: " + (absent.empty() ? std::string("none") : absent) + "\n";
  out += "partition,n_slices";
  for (std::size_t c = 1; c <= data::kNumClasses; ++c) out += ",c" + std::to_string(c);
  out += "\n";
  std::array<std::size_t, data::kNumClasses> total{};
  for (int j = 0; j < 3; ++j) {
    out += std::string(data::kPartitionNames[j]) + "," + std::to_string(r.n_slices[j]);
    for (std::size_t c = 0; c < data::kNumClasses; ++c) {
      out += "," + std::to_string(r.positives[j][c]);
      total[c] += r.positives[j][c];
    }
    out += "\n";
  }
  out += "all," + std::to_string(r.n_slices[0] + r.n_slices[1] + r.n_slices[2]);
  for (auto v : total) out += "," + std::to_string(v);
  return out + "\n";
}

/// Slices every record, splits 7:1:2, fits one normalizer per partition and
/// writes <out>/{train,val,test}.manifest, <out>/{...}.norm,
/// <out>/prep_summary.csv and the index <out>/dataset.manifest.
inline PrepResult cmd_prep(const PrepSpec& spec) {
  std::vector<fs::path> record_paths;
  const auto slices = data::load_slices(spec.manifest, &record_paths);
  if (slices.size() < 10) {
    throw std::invalid_argument("prep needs at least 10 slices, manifest yields " + std::to_string(slices.size()));
  }
  std::vector<data::Partition> assignment;
  const auto parts = data::make_partitions(slices, spec.seed, spec.by_record, &assignment);
  ensure_dir(spec.out);

  const std::string canonical = "prep source=" + file_digest(spec.manifest) +
                                " by_record=" + std::to_string(spec.by_record) + " seed=" + std::to_string(spec.seed);
  const Meta prov = provenance(canonical, spec.seed);
  PrepResult res;
  res.dataset = spec.out / "dataset.manifest";
  data::Manifest index;
  for (const auto& [k, v] : prov) index.set(k, v);
  index.set("leads", std::to_string(slices.front().n_leads()));
  std::array<data::Manifest, 3> pm;
  for (int j = 0; j < 3; ++j) {
    const std::string name = data::kPartitionNames[j];
    for (const auto& [k, v] : prov) pm[j].set(k, v);
    pm[j].set("partition", name);
    pm[j].set("normalizer", name + ".norm");
    pm[j].set("leads", std::to_string(slices.front().n_leads()));
    data::save_normalizer(parts[j].norm, spec.out / (name + ".norm"), preamble(prov));
    res.n_slices[j] = parts[j].size();
    for (const auto& s : parts[j].slices)
      for (std::size_t c = 0; c < data::kNumClasses; ++c) res.positives[j][c] += s.labels[c];
    index.set(name, name + ".manifest");
  }
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const int j = static_cast<int>(assignment[i]);
    const fs::path target = spec.out / (std::string(data::kPartitionNames[j]) + ".manifest");
    pm[j].entries.push_back({data::relative_entry(target, record_paths[i]), slices[i].window});
  }
  for (int j = 0; j < 3; ++j) {
    pm[j].set("n_slices", std::to_string(res.n_slices[j]));
    data::write_manifest(pm[j], spec.out / (std::string(data::kPartitionNames[j]) + ".manifest"));
  }
  for (std::size_t c = 0; c < data::kNumClasses; ++c)
    if (res.positives[0][c] + res.positives[1][c] + res.positives[2][c] == 0)
      res.absent_classes.push_back(static_cast<int>(c) + 1);
  index.set("summary", "prep_summary.csv");
  data::write_manifest(index, res.dataset);
  metrics::write_text(spec.out / "prep_summary.csv", prep_summary_csv(res, prov));
  return res;
}

/// Loads a partition manifest and normalizes it with its stored statistics.
inline data::SliceDataset load_partition(const fs::path& manifest_path) {
  const auto m = data::read_manifest(manifest_path);
  data::SliceDataset ds;
  const auto part = m.get("partition").value_or("train");
  for (int j = 0; j < 3; ++j)
    if (part == data::kPartitionNames[j]) ds.partition = static_cast<data::Partition>(j);
  const auto norm_entry = m.get("normalizer");
  if (!norm_entry) {
    throw std::runtime_error(manifest_path.string() + " names no normalizer; run `ecgbench prep` to create partitions");
  }
  ds.norm = data::load_normalizer(data::resolve(manifest_path, *norm_entry));
  std::map<fs::path, std::vector<data::Slice>> cache;
  for (const auto& e : m.entries) {
    if (!e.window) throw std::runtime_error(manifest_path.string() + ": entry " + e.path + " has no window index");
    const fs::path p = data::resolve(manifest_path, e.path);
    auto it = cache.find(p);
    if (it == cache.end()) {
      try {
        it = cache.emplace(p, data::slice_record(data::load_record(p))).first;
      } catch (const std::exception& ex) {
        throw data::RecordError("unreadable record " + p.stem().string() + ": " + ex.what());
      }
    }
    if (*e.window >= it->second.size()) {
      throw std::runtime_error(manifest_path.string() + ": window " + std::to_string(*e.window) + " out of range for " +
                               e.path);
    }
    ds.slices.push_back(it->second[*e.window]);
  }
  if (!ds.slices.empty() && ds.norm.n_leads() != ds.n_leads()) {
    throw std::runtime_error("normalizer has " + std::to_string(ds.norm.n_leads()) + " leads, records have " +
                             std::to_string(ds.n_leads()));
  }
  ds.slices = data::normalize(ds.slices, ds.norm);
  return ds;
}

// ---- run ----

enum class Precision { f32, f64 };

struct RunConfig {
  fs::path dataset;  // dataset.manifest written by prep
  fs::path out;
  std::vector<models::Paradigm> paradigms{models::kParadigms.begin(), models::kParadigms.end()};
  std::size_t leads = 12;
  training::TrainConfig train;
  Precision precision = Precision::f32;

  /// Every field that influences results; the output path does not.
  std::string canonical() const {
    std::ostringstream os;
    os << "run dataset=" << file_digest(dataset) << " models=";
    for (std::size_t i = 0; i < paradigms.size(); ++i) os << (i ? "," : "") << models::to_string(paradigms[i]);
    os << " leads=" << leads << " epochs=" << train.epochs << " batch=" << train.batch
       << " lr=" << shortest(train.optim.lr) << " wd=" << shortest(train.optim.weight_decay)
       << " tau=" << shortest(train.tau) << " threshold=" << shortest(train.threshold)
       << " precision=" << (precision == Precision::f32 ? "f32" : "f64") << " seed=" << train.seed
       << " wall_time=" << train.record_time;
    return os.str();
  }

  void validate() const {
    if (paradigms.empty()) throw std::invalid_argument("run: no models selected");
    if (leads != 9 && leads != 12) throw std::invalid_argument("run: --leads must be 9 or 12");
    if (!fs::exists(dataset)) throw std::invalid_argument("run: dataset manifest " + dataset.string() + " not found");
    train.validate();
  }
};

struct ModelOutcome {
  models::Paradigm paradigm;
  std::optional<metrics::EvalReport> report;  // empty when training diverged
  std::string failure;
  std::size_t best_epoch = 0;
};

struct RunResult {
  fs::path aggregate;
  std::vector<ModelOutcome> outcomes;
};

inline std::string aggregate_table(const std::vector<ModelOutcome>& outcomes, const Meta& meta) {
  std::string out = preamble(meta);
  for (const auto& o : outcomes)
    if (!o.report) out += "# failed: " + models::to_string(o.paradigm) + "\n";
  out += std::string(metrics::kAggregateHeader) + "\n";
  for (const auto& o : outcomes)
    if (o.report) out += metrics::aggregate_row(models::to_string(o.paradigm), *o.report) + "\n";
  return out;
}

inline void check_leads(std::size_t expected, std::size_t actual, const std::string& what) {
  if (expected != actual) {
    throw std::invalid_argument(what + ": model expects " + std::to_string(expected) + " leads, data has " +
                                std::to_string(actual));
  }
}

/// Test-set report of a saved checkpoint on an already-loaded partition.
inline metrics::EvalReport evaluate_checkpoint(const models::Checkpoint& ck, const data::SliceDataset& ds,
                                               double threshold) {
  check_leads(ck.params.config.n_leads, ds.n_leads(), "eval");
  return training::evaluate(ck.params, ds, threshold);
}

template <class T>
training::TrainResult<T> train_one(const models::ModelConfig& mc, const data::SliceDataset& tr,
                                   const data::SliceDataset& va, const training::TrainConfig& tc,
                                   std::ostream* progress) {
  return training::train<T>(mc, tr, va, tc, [&](const training::EpochEntry& e) {
    if (progress) {
      *progress << models::to_string(mc.paradigm) << " epoch " << e.epoch << " loss " << e.train_loss
                << " val_macro_f1 " << e.val_macro_f1 << std::endl;
    }
  });
}

/// Trains each paradigm, keeps the best-validation checkpoint, evaluates it
/// on the test partition and writes one directory per model plus
/// <out>/aggregate.csv. A diverging model leaves a FAILED marker and is
/// listed as failed in the table instead of stopping the run.
inline RunResult cmd_run(const RunConfig& cfg, std::ostream* progress = nullptr) {
  cfg.validate();
  const auto index = data::read_manifest(cfg.dataset);
  auto part_path = [&](const char* name) {
    const auto e = index.get(name);
    if (!e) throw std::runtime_error(cfg.dataset.string() + " names no " + name + " partition; run `ecgbench prep`");
    return data::resolve(cfg.dataset, *e);
  };
  const auto train_set = load_partition(part_path("train"));
  const auto val_set = load_partition(part_path("val"));
  const auto test_set = load_partition(part_path("test"));
  check_leads(cfg.leads, train_set.n_leads(), "run");
  ensure_dir(cfg.out);

  const Meta prov = provenance(cfg.canonical(), cfg.train.seed);
  RunResult res;
  for (auto p : cfg.paradigms) {
    const std::string name = models::to_string(p);
    const fs::path dir = cfg.out / name;
    ensure_dir(dir);
    fs::remove(dir / "FAILED");
    Meta meta = prov;
    meta.emplace_back("model", name);
    const auto mc = models::ModelConfig::defaults(p, cfg.leads);
    ModelOutcome o{p, std::nullopt, "", 0};
    try {
      training::RunLog log;
      if (cfg.precision == Precision::f32) {
        auto r = train_one<float>(mc, train_set, val_set, cfg.train, progress);
        models::save_checkpoint(r.best, dir / "best", meta);
        log = std::move(r.log);
      } else {
        auto r = train_one<double>(mc, train_set, val_set, cfg.train, progress);
        models::save_checkpoint(r.best, dir / "best", meta);
        log = std::move(r.log);
      }
      log.meta = meta;
      training::write_runlog(log, dir / "runlog.csv");
      o.best_epoch = log.best_epoch;
      // evaluate what was saved, so a later `eval` reproduces these numbers
      o.report = evaluate_checkpoint(models::load_checkpoint(dir / "best.ckpt"), test_set, cfg.train.threshold);
      metrics::write_report(*o.report, dir / "test_report", meta);
    } catch (const training::TrainingDiverged& e) {
      o.failure = e.what();
      metrics::write_text(dir / "FAILED", preamble(meta) + o.failure + "\n");
      if (progress) *progress << name << " failed: " << o.failure << std::endl;
    }
    res.outcomes.push_back(std::move(o));
  }
  res.aggregate = cfg.out / "aggregate.csv";
  metrics::write_text(res.aggregate, aggregate_table(res.outcomes, prov));
  return res;
}

// ---- eval ----

struct EvalSpec {
  fs::path checkpoint;
  fs::path partition;  // partition manifest written by prep
  fs::path out;        // report stem; <out>.json and <out>.per_class.csv
  double threshold = 0.5;
};

struct EvalOutcome {
  std::string model;
  metrics::EvalReport report;
};

inline EvalOutcome cmd_eval(const EvalSpec& spec) {
  if (!(spec.threshold > 0 && spec.threshold < 1)) throw std::invalid_argument("threshold must lie in (0, 1)");
  const auto ck = models::load_checkpoint(spec.checkpoint);
  const auto ds = load_partition(spec.partition);
  auto report = evaluate_checkpoint(ck, ds, spec.threshold);
  if (!spec.out.empty()) {
    if (spec.out.has_parent_path()) ensure_dir(spec.out.parent_path());
    Meta meta = ck.meta;
    meta.emplace_back("partition", file_digest(spec.partition));
    meta.emplace_back("threshold", shortest(spec.threshold));
    metrics::write_report(report, spec.out, meta);
  }
  return {models::to_string(ck.params.config.paradigm), std::move(report)};
}

// ---- curves ----

struct CurveSeries {
  std::string model;
  std::vector<std::pair<std::size_t, double>> points;  // (epoch, val macro-F1), epoch ascending
};

/// Long-format validation curves: one row per (model, epoch).
inline std::string curves_csv(const std::vector<CurveSeries>& series) {
  std::string out = "model,epoch,val_macro_f1\n";
  char buf[64];
  for (const auto& s : series)
    for (const auto& [e, f1] : s.points) {
      std::snprintf(buf, sizeof buf, ",%zu,%.6f\n", e, f1);
      out += s.model + buf;
    }
  return out;
}

/// Static line chart of the same series.
inline std::string curves_svg(const std::vector<CurveSeries>& series) {
  static constexpr std::array<const char*, 6> kColors{"#1b6ca8", "#d1495b", "#edae49", "#00798c", "#30638e", "#6a4c93"};
  const double W = 640, Hh = 400, m = 48;
  std::size_t max_epoch = 1;
  for (const auto& s : series)
    for (const auto& pt : s.points) max_epoch = std::max(max_epoch, pt.first);
  auto px = [&](std::size_t e) { return m + (W - 2 * m) * static_cast<double>(e) / static_cast<double>(max_epoch); };
  auto py = [&](double f) { return Hh - m - (Hh - 2 * m) * std::clamp(f, 0.0, 1.0); };
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << m << "\" y1=\"" << Hh - m << "\" x2=\"" << W - m << "\" y2=\"" << Hh - m
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << Hh - m << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"" << Hh - 12 << "\" text-anchor=\"middle\">epoch</text>\n"
     << "<text x=\"14\" y=\"" << Hh / 2 << "\" transform=\"rotate(-90 14 " << Hh / 2
     << ")\" text-anchor=\"middle\">validation macro-F1</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % kColors.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [e, f1] : series[i].points) os << px(e) << ',' << py(f1) << ' ';
    os << "\"/>\n<text x=\"" << W - m + 4 << "\" y=\"" << m + 16.0 * static_cast<double>(i) << "\" fill=\"" << color
       << "\" font-size=\"12\">" << series[i].model << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Reads run logs (model name from their `model` metadata, else the parent
/// directory) and writes <out>.csv and <out>.svg. Empty logs give empty
/// series and a warning.
inline std::vector<CurveSeries> cmd_curves(const std::vector<fs::path>& logs, const fs::path& out,
                                           std::ostream* warnings = &std::cerr) {
  if (logs.empty()) throw std::invalid_argument("curves: no run logs given");
  std::vector<CurveSeries> series;
  for (const auto& path : logs) {
    const auto log = training::read_runlog(path);
    CurveSeries s;
    s.model = path.parent_path().filename().string();
    for (const auto& [k, v] : log.meta)
      if (k == "model") s.model = v;
    for (const auto& e : log.entries) s.points.emplace_back(e.epoch, e.val_macro_f1);
    std::sort(s.points.begin(), s.points.end());
    if (s.points.empty() && warnings) *warnings << "warning: run log " << path.string() << " has no epochs\n";
    series.push_back(std::move(s));
  }
  if (!out.empty()) {
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    fs::path csv = out, svg = out;
    metrics::write_text(csv.replace_extension(".csv"), curves_csv(series));
    metrics::write_text(svg.replace_extension(".svg"), curves_svg(series));
  }
  return series;
}

}  // namespace ecgbench::bench
