#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ecgbench/bench/commands.hpp"

using namespace ecgbench;

int main(int argc, char** argv) {
  CLI::App app{"ecgbench: multi-label ECG classification benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  // synth
  bench::SynthSpec synth;
  int n_classes = 8;
  std::vector<int> exclude;
  bool container = false;
  auto* s = app.add_subcommand("synth", "generate a synthetic record set and its manifest");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.gen.seed, "generator seed");
  s->add_option("--leads", synth.gen.n_leads, "lead count")->check(CLI::IsMember({9, 12}));
  s->add_option("--classes", n_classes, "use classes 1..N");
  s->add_option("--exclude", exclude, "classes left out (1-based)")->delimiter(',');
  s->add_option("--records-per-class", synth.gen.records_per_class, "records per class");
  s->add_option("--duration", synth.gen.duration_s, "record length in seconds");
  s->add_option("--cooccurrence", synth.gen.cooccurrence, "probability of an extra label");
  s->add_option("--noise", synth.gen.noise, "white-noise standard deviation");
  s->add_flag("--container", container, "write single-file .ecg records");

  // prep
  bench::PrepSpec prep;
  auto* p = app.add_subcommand("prep", "slice, split 7:1:2 and fit per-partition normalizers");
  p->add_option("--manifest", prep.manifest, "record manifest")->required()->check(CLI::ExistingFile);
  p->add_option("--out", prep.out, "output directory")->required();
  p->add_option("--seed", prep.seed, "split seed");
  p->add_flag("--by-record", prep.by_record, "keep all slices of a record in one partition");

  // run
  bench::RunConfig run;
  std::string models_csv = "resnet1d,bilstm,transformer,mamba2";
  std::string precision = "f32";
  auto* r = app.add_subcommand("run", "train, select and test every chosen model");
  r->add_option("--manifest", run.dataset, "dataset.manifest written by prep")->required()->check(CLI::ExistingFile);
  r->add_option("--out", run.out, "results directory")->required();
  r->add_option("--seed", run.train.seed, "root seed");
  r->add_option("--leads", run.leads, "lead configuration")->check(CLI::IsMember({9, 12}));
  r->add_option("--models", models_csv, "comma-separated models");
  r->add_option("--epochs", run.train.epochs, "training epochs");
  r->add_option("--batch", run.train.batch, "mini-batch size");
  r->add_option("--lr", run.train.optim.lr, "AdamW learning rate");
  r->add_option("--tau", run.train.tau, "class-weight clip");
  r->add_option("--threshold", run.train.threshold, "decision threshold");
  r->add_option("--precision", precision, "training precision")->check(CLI::IsMember({"f32", "f64"}));
  r->add_flag("--wall-time", run.train.record_time, "record elapsed seconds in run logs (breaks byte identity)");

  // eval
  bench::EvalSpec eval;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a prepared partition");
  e->add_option("--checkpoint", eval.checkpoint, "checkpoint manifest (.ckpt)")->required();
  e->add_option("--manifest", eval.partition, "partition manifest written by prep")->required()->check(CLI::ExistingFile);
  e->add_option("--out", eval.out, "report stem");
  e->add_option("--threshold", eval.threshold, "decision threshold");

  // curves
  std::vector<std::filesystem::path> logs;
  std::filesystem::path curves_out = "curves";
  auto* c = app.add_subcommand("curves", "validation macro-F1 curves from run logs");
  c->add_option("logs", logs, "run log files")->required()->check(CLI::ExistingFile);
  c->add_option("--out", curves_out, "output stem; writes .csv and .svg");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) {
      synth.gen.classes = data::SynthConfig::first_classes(n_classes, exclude);
      synth.layout = container ? data::RecordLayout::container : data::RecordLayout::two_file;
      std::cout << bench::cmd_synth(synth).string() << "\n";
    } else if (*p) {
      auto res = bench::cmd_prep(prep);
      std::cout << data::detail::read_file(prep.out / "prep_summary.csv");
      std::cout << res.dataset.string() << "\n";
    } else if (*r) {
      run.paradigms.clear();
      std::stringstream ss(models_csv);
      for (std::string m; std::getline(ss, m, ',');)
        if (!m.empty()) run.paradigms.push_back(models::parse_paradigm(m));
      run.precision = precision == "f64" ? bench::Precision::f64 : bench::Precision::f32;
      auto res = bench::cmd_run(run, &std::cerr);
      std::cout << data::detail::read_file(res.aggregate);
      for (const auto& o : res.outcomes)
        if (!o.report) return 3;
    } else if (*e) {
      auto res = bench::cmd_eval(eval);
      std::cout << metrics::kAggregateHeader << "\n" << metrics::aggregate_row(res.model, res.report) << "\n";
    } else if (*c) {
      auto series = bench::cmd_curves(logs, curves_out);
      std::cout << bench::curves_csv(series);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
