#pragma once

// Per-experiment runner entry points, consumed by the run_experiment
// dispatcher. Each experiment expands into a list of independent tasks
// (one per arm x seed, or instance x repeat); tasks throw on failure.

#include <string>
#include <vector>

#include "himo/harness/config.hpp"
#include "himo/harness/harness.hpp"

#include "run_util.hpp"

namespace himo::harness {

inline constexpr const char* kProbeCsvHeader =
    "step,feature,test_xent,train_xent,n_train,n_test,degenerate,env_step,seed";

std::vector<RunTask> portal_tasks(const ExperimentConfig& cfg, const RunOptions& opt);
std::vector<RunTask> mrp_tasks(const ExperimentConfig& cfg, const RunOptions& opt);

// Reads each run's values.csv and writes <out>/mrp/final_errors.csv.
void mrp_write_summary(const ExperimentConfig& cfg);

void run_chain(const ExperimentConfig& cfg);
void run_proposition(const ExperimentConfig& cfg);

}  // namespace himo::harness
