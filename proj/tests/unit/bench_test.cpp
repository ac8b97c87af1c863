#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "ecgbench/bench/commands.hpp"

namespace {

using namespace ecgbench;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ecgbench_bench_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) { return data::detail::read_file(p); }

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (!line.empty() && line.front() != '#') out.push_back(line);
  return out;
}

bench::SynthSpec small_spec(const fs::path& out, int classes, std::size_t per_class, std::vector<int> exclude = {}) {
  bench::SynthSpec s;
  s.gen.classes = data::SynthConfig::first_classes(classes, exclude);
  s.gen.records_per_class = per_class;
  s.gen.duration_s = 5;
  s.gen.seed = 5;
  s.out = out;
  return s;
}

/// Small prepared dataset shared by the run/eval tests.
struct Prepared {
  fs::path root, dataset;
};

const Prepared& prepared() {
  static const Prepared p = [] {
    Prepared out{scratch("prepared"), {}};
    const auto manifest = bench::cmd_synth(small_spec(out.root / "syn", 3, 8));
    out.dataset = bench::cmd_prep({manifest, out.root / "prep", 9, false}).dataset;
    return out;
  }();
  return p;
}

bench::RunConfig small_run(const fs::path& out) {
  bench::RunConfig cfg;
  cfg.dataset = prepared().dataset;
  cfg.out = out;
  cfg.paradigms = {models::Paradigm::resnet1d};
  cfg.train.epochs = 2;
  cfg.train.batch = 8;
  cfg.train.seed = 4;
  return cfg;
}

TEST(Synth, WritesOneFilePerRecordAndAManifestLinePerRecord) {
  auto spec = small_spec(scratch("count"), 8, 60);
  spec.gen.duration_s = 10;
  const auto manifest = bench::cmd_synth(spec);
  EXPECT_EQ(data_lines(slurp(manifest)).size(), 480u);
  std::size_t payloads = 0;
  for (const auto& e : fs::directory_iterator(spec.out / "records")) payloads += e.path().extension() == ".f32";
  EXPECT_EQ(payloads, 480u);
  const auto m = data::read_manifest(manifest);
  EXPECT_EQ(m.get("seed"), "5");
  EXPECT_NE(m.get("generator")->find("records_per_class=60"), std::string::npos);
  EXPECT_TRUE(m.get("config_hash").has_value());
  EXPECT_EQ(m.get("version"), std::string(kToolkitVersion));
}

TEST(Synth, SameSeedGivesByteIdenticalPayloads) {
  const auto a = bench::cmd_synth(small_spec(scratch("det_a"), 3, 4));
  const auto b = bench::cmd_synth(small_spec(scratch("det_b"), 3, 4));
  EXPECT_EQ(slurp(a), slurp(b));
  for (const auto& e : fs::directory_iterator(a.parent_path() / "records")) {
    EXPECT_EQ(slurp(e.path()), slurp(b.parent_path() / "records" / e.path().filename())) << e.path();
  }
}

TEST(Synth, MoreClassesThanTheLabelSpaceRejected) {
  EXPECT_THROW(data::SynthConfig::first_classes(20), std::invalid_argument);
  auto spec = small_spec(scratch("twenty"), 3, 2);
  spec.gen.classes.assign(20, 1);
  EXPECT_THROW(bench::cmd_synth(spec), std::invalid_argument);
}

TEST(Synth, UnwritableOutputRejected) {
  const fs::path blocker = scratch("blocker");
  metrics::write_text(blocker, "not a directory");
  EXPECT_THROW(bench::cmd_synth(small_spec(blocker / "sub", 2, 2)), std::runtime_error);
}

TEST(Prep, SummarySchemaRatiosAndAbsentClassFlag) {
  const fs::path root = scratch("prep");
  const auto manifest = bench::cmd_synth(small_spec(root / "syn", 8, 12, {7}));
  const auto res = bench::cmd_prep({manifest, root / "prep", 1, false});
  const std::size_t n = res.n_slices[0] + res.n_slices[1] + res.n_slices[2];
  EXPECT_EQ(n, 84u);
  const double ratio[3] = {0.7, 0.1, 0.2};
  for (int j = 0; j < 3; ++j) EXPECT_LE(std::abs(static_cast<double>(res.n_slices[j]) - ratio[j] * n), 1.0) << j;
  EXPECT_EQ(res.absent_classes, (std::vector<int>{7, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19}));

  const std::string text = slurp(root / "prep" / "prep_summary.csv");
  EXPECT_NE(text.find("# absent_classes: 7,9,"), std::string::npos);
  const auto rows = data_lines(text);
  ASSERT_EQ(rows.size(), 5u);
  std::string header = "partition,n_slices";
  for (int c = 1; c <= 19; ++c) header += ",c" + std::to_string(c);
  EXPECT_EQ(rows[0], header);
  EXPECT_EQ(rows[1].rfind("train," + std::to_string(res.n_slices[0]) + ",", 0), 0u);
  EXPECT_EQ(rows[4].rfind("all,84,", 0), 0u);
}

TEST(Prep, StoredPartitionsReloadBitIdentically) {
  const fs::path root = scratch("reload");
  const auto manifest = bench::cmd_synth(small_spec(root / "syn", 3, 6));
  bench::cmd_prep({manifest, root / "prep", 2, false});
  const auto raw = data::load_slices(manifest);
  const auto parts = data::make_partitions(raw, 2);
  for (int j = 0; j < 3; ++j) {
    const auto ds = bench::load_partition(root / "prep" / (std::string(data::kPartitionNames[j]) + ".manifest"));
    ASSERT_EQ(ds.size(), parts[j].size());
    EXPECT_EQ(ds.norm.mean, parts[j].norm.mean);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      EXPECT_EQ(ds.slices[i].record_id, parts[j].slices[i].record_id);
      const auto a = ds.slices[i].x.values(), b = parts[j].slices[i].x.values();
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << i;
    }
  }
}

TEST(Prep, UnreadableRecordAbortsWithItsId) {
  const fs::path root = scratch("broken");
  const auto manifest = bench::cmd_synth(small_spec(root / "syn", 2, 6));
  fs::resize_file(root / "syn" / "records" / "synth00003.f32", 100);
  try {
    bench::cmd_prep({manifest, root / "prep", 0, false});
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("synth00003"), std::string::npos) << e.what();
  }
}

TEST(Prep, MissingNormalizerAsksForPrep) {
  const fs::path prep = prepared().dataset.parent_path();
  const fs::path copy = scratch("nonorm");
  fs::create_directories(copy);
  data::Manifest m = data::read_manifest(prep / "test.manifest");
  for (auto& e : m.entries) e.path = data::relative_entry(copy / "x", data::resolve(prep / "test.manifest", e.path));
  data::write_manifest(m, copy / "test.manifest");
  try {
    bench::load_partition(copy / "test.manifest");
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("prep"), std::string::npos) << e.what();
  }
}

TEST(Run, SingleModelTableRerunIdenticalAndEvalReproducesTestMetrics) {
  const auto a = bench::cmd_run(small_run(scratch("run_a")));
  const auto b = bench::cmd_run(small_run(scratch("run_b")));
  const std::string table = slurp(a.aggregate);
  const auto rows = data_lines(table);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], metrics::kAggregateHeader);
  EXPECT_EQ(rows[1].rfind("resnet1d,", 0), 0u);
  EXPECT_NE(table.find("# seed: 4"), std::string::npos);
  EXPECT_NE(table.find("# config_hash: "), std::string::npos);
  EXPECT_EQ(table, slurp(b.aggregate));
  EXPECT_EQ(slurp(a.aggregate.parent_path() / "resnet1d" / "runlog.csv"),
            slurp(b.aggregate.parent_path() / "resnet1d" / "runlog.csv"));
  EXPECT_EQ(slurp(a.aggregate.parent_path() / "resnet1d" / "test_report.json"),
            slurp(b.aggregate.parent_path() / "resnet1d" / "test_report.json"));

  const auto ev = bench::cmd_eval({a.aggregate.parent_path() / "resnet1d" / "best.ckpt",
                                   prepared().dataset.parent_path() / "test.manifest", {}, 0.5});
  EXPECT_EQ(ev.model, "resnet1d");
  EXPECT_EQ(metrics::aggregate_row("resnet1d", ev.report), rows[1]);
  EXPECT_EQ(ev.report.macro.f1, a.outcomes[0].report->macro.f1);
  EXPECT_EQ(ev.report.micro.auc, a.outcomes[0].report->micro.auc);
}

TEST(Run, DivergingModelsLeaveMarkersWithoutStoppingTheRun) {
  auto cfg = small_run(scratch("diverge"));
  cfg.paradigms = {models::Paradigm::resnet1d, models::Paradigm::transformer};
  cfg.train.optim.lr = 1e38;
  cfg.train.epochs = 3;
  const auto res = bench::cmd_run(cfg);
  ASSERT_EQ(res.outcomes.size(), 2u);
  for (const auto& o : res.outcomes) {
    EXPECT_FALSE(o.report.has_value());
    EXPECT_NE(o.failure.find("non-finite loss"), std::string::npos) << o.failure;
    EXPECT_TRUE(fs::exists(cfg.out / models::to_string(o.paradigm) / "FAILED"));
  }
  const std::string table = slurp(res.aggregate);
  EXPECT_NE(table.find("# failed: resnet1d"), std::string::npos);
  EXPECT_NE(table.find("# failed: transformer"), std::string::npos);
  EXPECT_EQ(data_lines(table), std::vector<std::string>{metrics::kAggregateHeader});
}

TEST(Run, LeadMismatchNamesBothCounts) {
  auto cfg = small_run(scratch("leads"));
  cfg.leads = 9;
  try {
    bench::cmd_run(cfg);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("9 leads"), std::string::npos) << msg;
    EXPECT_NE(msg.find("12"), std::string::npos) << msg;
  }
  EXPECT_THROW(
      {
        auto c = small_run(scratch("empty"));
        c.paradigms.clear();
        bench::cmd_run(c);
      },
      std::invalid_argument);
}

TEST(Eval, CheckpointAgainstOtherLeadCountRejected) {
  const fs::path root = scratch("eval_leads");
  auto spec = small_spec(root / "syn", 3, 6);
  spec.gen.n_leads = 9;
  bench::cmd_prep({bench::cmd_synth(spec), root / "prep", 0, false});
  const auto p = models::init_params<float>(models::ModelConfig::defaults(models::Paradigm::resnet1d, 12), 1);
  models::save_checkpoint(p, root / "ck");
  try {
    bench::cmd_eval({root / "ck.ckpt", root / "prep" / "test.manifest", {}, 0.5});
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("12 leads"), std::string::npos) << msg;
    EXPECT_NE(msg.find("has 9"), std::string::npos) << msg;
  }
}

TEST(Curves, SeriesPerLogEmptyLogWarnsEpochsAscending) {
  const fs::path root = scratch("curves");
  fs::create_directories(root);
  std::vector<fs::path> logs;
  for (auto p : models::kParadigms) {
    training::RunLog log;
    log.meta = {{"model", models::to_string(p)}};
    if (p != models::Paradigm::mamba2)
      for (std::size_t e : {3u, 1u, 2u}) log.entries.push_back({e, 0.5, 0.1 * static_cast<double>(e), 0.01, 0});
    logs.push_back(root / (models::to_string(p) + ".csv"));
    training::write_runlog(log, logs.back());
  }
  std::ostringstream warn;
  const auto series = bench::cmd_curves(logs, root / "out" / "curves", &warn);
  ASSERT_EQ(series.size(), 4u);
  EXPECT_EQ(series[1].model, "bilstm");
  EXPECT_TRUE(series[3].points.empty());
  EXPECT_NE(warn.str().find("mamba2.csv"), std::string::npos);
  for (const auto& s : series)
    for (std::size_t i = 1; i < s.points.size(); ++i) EXPECT_LT(s.points[i - 1].first, s.points[i].first);
  const auto rows = data_lines(slurp(root / "out" / "curves.csv"));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0], "model,epoch,val_macro_f1");
  EXPECT_EQ(rows[1], "resnet1d,1,0.100000");
  EXPECT_TRUE(fs::exists(root / "out" / "curves.svg"));
}

}  // namespace
