#include "himo/harness/harness.hpp"

#include <iostream>

#include "runners.hpp"

namespace himo {

int run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  using namespace harness;
  try {
    std::vector<RunTask> tasks;
    if (cfg.experiment == "portal_ac" || cfg.experiment == "portal_q") {
      tasks = portal_tasks(cfg, opt);
    } else if (cfg.experiment == "mrp") {
      tasks = mrp_tasks(cfg, opt);
    } else if (cfg.experiment == "chain") {
      tasks.push_back({"chain counting", [&cfg] { run_chain(cfg); }});
    } else if (cfg.experiment == "proposition") {
      tasks.push_back({"proposition sweep", [&cfg] { run_proposition(cfg); }});
    } else {
      std::cerr << "unknown experiment: " << cfg.experiment << "\n";
      return 3;
    }

    const int failures = execute_tasks(std::move(tasks), opt.parallel_runs, opt.quiet);
    if (failures > 0) return 3;
    if (cfg.experiment == "mrp") mrp_write_summary(cfg);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace himo
