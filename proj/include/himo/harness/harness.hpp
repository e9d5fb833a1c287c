#pragma once

// Experiment driver: turns a validated ExperimentConfig into training runs,
// metric CSVs, probe dumps, checkpoints, and aggregate exports.
//
// Layout under <out_dir>:
//   portal_ac/<arm>/seed_<S>/metrics.csv + probe.csv + checkpoint.json
//   portal_q/<arm>/seed_<S>/metrics.csv + checkpoint.json
//   mrp/instance_<i>/repeat_<r>/metrics.csv + values.csv + checkpoint.json
//   mrp/final_errors.csv
//   chain/counting.csv
//   proposition/report.json
//   curves.csv                        (written by export_curves)
//
// Arms: portal experiments always train "himo" (configured loss weights)
// and "baseline" (alpha = beta = 0, same code and nets) under shared seeds.

#include <cstdint>
#include <string>

#include "himo/harness/config.hpp"

namespace himo {

struct RunOptions {
  std::string resume;      // "" = fresh; "auto" = resume each run's own
                           // checkpoint if present; else a checkpoint path
                           // (requires the config to select a single run)
  int parallel_runs = 1;   // independent runs executed on worker threads
  bool quiet = false;      // suppress per-run progress lines on stderr
};

// Executes every run the config describes. Returns a process exit status:
// 0 on success, 3 on runtime failure (failures are logged to stderr).
int run_experiment(const ExperimentConfig& cfg, const RunOptions& opt);

// Aggregates every <out_dir>/**/metrics.csv across its sibling runs into
// <out_dir>/curves.csv (long format: arm, step, column, mean/median/min/max,
// n_runs). Rows are inner-joined on step; mismatched step grids warn on
// stderr. Returns 0 on success, 3 when no metrics files were found.
int export_curves(const std::string& out_dir, bool quiet = false);

}  // namespace himo
