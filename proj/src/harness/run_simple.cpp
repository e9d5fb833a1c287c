#include <filesystem>
#include <string>
#include <vector>

#include "himo/analysis/counting.hpp"
#include "himo/analysis/proposition.hpp"
#include "himo/envs/chain.hpp"
#include "himo/harness/checkpoint.hpp"
#include "himo/learning.hpp"
#include "himo/rng.hpp"
#include "himo/version.hpp"

#include "runners.hpp"

namespace himo::harness {

namespace fs = std::filesystem;

// Tabular counting comparison: one CSV with both schedules, budgets
// 1..total_steps, plus the exact coverage thresholds in a comment.
void run_chain(const ExperimentConfig& cfg) {
  const std::uint64_t master = cfg.seeds.front();
  const ChainInstance chain(cfg.chain_n, cfg.chain_m,
                            derive_seed(master, seed_tag::instance, 0),
                            /*noiseless=*/true);

  std::vector<std::size_t> budgets;
  for (long b = 1; b <= cfg.total_steps; ++b) budgets.push_back(static_cast<std::size_t>(b));

  OutFile out = OutFile::fresh(
      fs::path(cfg.out_dir) / "chain" / "counting.csv",
      csv_comment(cfg) +
          "schedule,budget,joint_mse,factored_mse,joint_cells_seen,factored_cells_seen,"
          "joint_zero_budget,factored_zero_budget\n");

  const auto emit = [&](SampleSchedule schedule, const char* name) {
    const CountingReport report =
        counting_experiment(chain, budgets, schedule, derive_seed(master, seed_tag::env, 0));
    for (const CountingPoint& p : report.points) {
      out.line(std::string(name) + "," + std::to_string(p.budget) + "," +
               format_double(p.joint_mse) + "," + format_double(p.factored_mse) + "," +
               std::to_string(p.joint_cells_seen) + "," +
               std::to_string(p.factored_cells_seen) + "," +
               std::to_string(report.joint_zero_budget) + "," +
               std::to_string(report.factored_zero_budget));
    }
  };
  emit(SampleSchedule::coverage_first, "coverage_first");
  emit(SampleSchedule::random_draws, "random_draws");
  out.flush();
}

// Randomized instances of the premise -> conclusion implication, each
// verified in closed form; the first instance is also cross-checked by
// Monte Carlo. Writes a JSON report with per-instance counts.
void run_proposition(const ExperimentConfig& cfg) {
  const std::uint64_t master = cfg.seeds.front();
  std::size_t premise_count = 0;
  std::size_t conclusion_count = 0;
  std::size_t degenerate_count = 0;
  nlohmann::json worst;  // instance with the smallest conclusion margin
  double worst_margin = 0.0;
  bool have_worst = false;

  for (std::size_t i = 0; i < cfg.prop_instances; ++i) {
    const PropositionInstance inst =
        random_proposition_instance(derive_seed(master, seed_tag::instance, i));
    const PropositionReport rep = proposition_check(inst);
    if (rep.degenerate) ++degenerate_count;
    if (rep.premise_holds) ++premise_count;
    if (rep.premise_holds && rep.conclusion_holds) ++conclusion_count;
    const double margin = rep.l_v - rep.l_vm;
    if (rep.premise_holds && (!have_worst || margin < worst_margin)) {
      have_worst = true;
      worst_margin = margin;
      worst["index"] = i;
      worst["l_v"] = rep.l_v;
      worst["l_vm"] = rep.l_vm;
      worst["l_vplus"] = rep.l_vplus;
      worst["l_model"] = rep.l_model;
      worst["c_ratio"] = rep.c_ratio;
      worst["threshold"] = rep.threshold;
      worst["margin"] = margin;
    }
  }

  nlohmann::json mc;
  if (cfg.prop_instances > 0 && cfg.prop_mc_samples > 0) {
    const PropositionInstance inst =
        random_proposition_instance(derive_seed(master, seed_tag::instance, 0));
    const PropositionReport exact = proposition_check(inst);
    const PropositionMcReport est = proposition_check_mc(
        inst, cfg.prop_mc_samples, derive_seed(master, seed_tag::eval, 0));
    mc["samples"] = est.samples;
    mc["l_v"] = {{"exact", exact.l_v}, {"mc", est.l_v}, {"se", est.l_v_se}};
    mc["l_vplus"] = {{"exact", exact.l_vplus}, {"mc", est.l_vplus}, {"se", est.l_vplus_se}};
    mc["l_model"] = {{"exact", exact.l_model}, {"mc", est.l_model}, {"se", est.l_model_se}};
    mc["l_vm"] = {{"exact", exact.l_vm}, {"mc", est.l_vm}, {"se", est.l_vm_se}};
  }

  nlohmann::json doc;
  doc["config_hash"] = config_hash(cfg);
  doc["version"] = kVersion;
  doc["instances"] = cfg.prop_instances;
  doc["premise_satisfied"] = premise_count;
  doc["conclusion_satisfied"] = conclusion_count;
  doc["degenerate"] = degenerate_count;
  doc["all_pass"] = premise_count == cfg.prop_instances && conclusion_count == premise_count;
  if (have_worst) doc["smallest_margin_instance"] = worst;
  if (!mc.is_null()) doc["monte_carlo_crosscheck"] = mc;

  const fs::path dir = fs::path(cfg.out_dir) / "proposition";
  fs::create_directories(dir);
  save_checkpoint_file((dir / "report.json").string(), doc);
}

}  // namespace himo::harness
