// Command-line driver for the experiment harness.
//
//   himo run        --config FILE | --experiment NAME  [--seed S ...]
//                   [--out DIR] [--set key=value ...] [--resume auto|CKPT]
//                   [--parallel-seeds N] [--quiet]
//   himo validate   --config FILE
//   himo export     --out DIR
//   himo prop-check [--instances N] [--seed S]
//
// Exit codes: 0 success, 2 config error, 3 runtime failure.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "himo/analysis/proposition.hpp"
#include "himo/harness/config.hpp"
#include "himo/harness/harness.hpp"
#include "himo/rng.hpp"
#include "himo/version.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunArgs {
  std::string config_path;
  std::string experiment;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::vector<std::string> sets;
  std::string resume;
  int parallel = 1;
  bool quiet = false;
};

// Builds the effective config or reports why it can't be built.
bool resolve_config(const RunArgs& args, himo::ExperimentConfig& cfg) {
  try {
    if (!args.config_path.empty())
      cfg = himo::load_config(args.config_path);
    else if (!args.experiment.empty())
      cfg = himo::default_config(args.experiment);
    else {
      std::cerr << "run: pass --config FILE or --experiment NAME\n";
      return false;
    }
    himo::apply_overrides(cfg, args.sets);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return false;
  }
  if (!args.seeds.empty()) cfg.seeds = args.seeds;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return true;
}

int report_validation(const himo::ValidationReport& report) {
  for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
  for (const std::string& e : report.errors) std::cerr << "error: " << e << "\n";
  return report.ok() ? 0 : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hindsight-model training and analysis harness"};
  app.set_version_flag("--version", std::string(himo::kVersion));
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "execute an experiment");
  run->add_option("--config", run_args.config_path, "key=value config file");
  run->add_option("--experiment", run_args.experiment,
                  "experiment name with default settings (mrp, portal_ac, portal_q, chain, "
                  "proposition)");
  run->add_option("--seed", run_args.seeds, "seed list override (repeatable)");
  run->add_option("--out", run_args.out_dir, "output directory override");
  run->add_option("--set", run_args.sets, "config override key=value (repeatable)");
  run->add_option("--resume", run_args.resume,
                  "'auto' resumes each run's own checkpoint; a checkpoint path resumes "
                  "exactly that run");
  run->add_option("--parallel-seeds", run_args.parallel, "independent runs in flight")
      ->check(CLI::PositiveNumber);
  run->add_flag("--quiet", run_args.quiet, "suppress progress lines");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("--config", validate_path, "key=value config file")->required();

  std::string export_dir;
  CLI::App* exp = app.add_subcommand("export", "aggregate metrics into curves.csv");
  exp->add_option("--out", export_dir, "output directory of previous runs")->required();

  std::size_t prop_instances = 1000;
  std::uint64_t prop_seed = 1;
  CLI::App* prop = app.add_subcommand("prop-check", "run the value-bound implication sweep");
  prop->add_option("--instances", prop_instances, "number of random instances");
  prop->add_option("--seed", prop_seed, "master seed");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    himo::ExperimentConfig cfg;
    if (!resolve_config(run_args, cfg)) return kExitConfig;
    const int status = report_validation(himo::validate_config(cfg));
    if (status != 0) return status;
    himo::RunOptions opt;
    opt.resume = run_args.resume;
    opt.parallel_runs = run_args.parallel;
    opt.quiet = run_args.quiet;
    return himo::run_experiment(cfg, opt);
  }

  if (validate->parsed()) {
    himo::ExperimentConfig cfg;
    try {
      cfg = himo::load_config(validate_path);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    const int status = report_validation(himo::validate_config(cfg));
    if (status == 0) std::cout << "ok: " << himo::config_hash(cfg) << "\n";
    return status;
  }

  if (exp->parsed()) return himo::export_curves(export_dir);

  if (prop->parsed()) {
    std::size_t premise = 0, conclusion = 0;
    for (std::size_t i = 0; i < prop_instances; ++i) {
      const himo::PropositionInstance inst =
          himo::random_proposition_instance(himo::derive_seed(prop_seed, himo::seed_tag::instance, i));
      const himo::PropositionReport rep = himo::proposition_check(inst);
      if (rep.premise_holds) ++premise;
      if (rep.premise_holds && rep.conclusion_holds) ++conclusion;
    }
    std::cout << "instances=" << prop_instances << " premise=" << premise
              << " conclusion=" << conclusion << "\n";
    return (premise == prop_instances && conclusion == premise) ? 0 : kExitRuntime;
  }

  return 0;
}
