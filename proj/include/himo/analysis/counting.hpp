#pragma once

// Sample-complexity comparison on the tabular chain. Two estimators consume
// one shared stream of start cells (x, x'):
//
//   joint     tabular mean of z per (x, x') cell; n*m cells total
//   factored  tabular y estimate per x' (m cells) plus tabular z per
//             (x, y') cell (2n cells); m + 2n cells total
//
// Unvisited predictions default to 0. On a noiseless chain each cell is
// exact after one visit, so MSE reaching 0 is purely a coverage question:
// the factored estimator needs every x' and every (x, y') combination,
// the joint estimator needs every (x, x') cell.

#include <cstdint>
#include <vector>

#include "himo/envs/chain.hpp"

namespace himo {

enum class SampleSchedule {
  coverage_first,  // deterministic stream that covers cells before repeating
  random_draws,    // iid uniform start cells
};

struct CountingPoint {
  std::size_t budget = 0;
  double joint_mse = 0.0;
  double factored_mse = 0.0;
  std::size_t joint_cells_seen = 0;
  std::size_t factored_cells_seen = 0;  // distinct x' seen + distinct (x, y') seen
};

struct CountingReport {
  std::size_t joint_table_cells = 0;     // n * m
  std::size_t factored_table_cells = 0;  // m + 2n
  // first sample count at which each estimator's MSE hits exactly 0
  // (0 = not reached within the stream)
  std::size_t joint_zero_budget = 0;
  std::size_t factored_zero_budget = 0;
  std::vector<CountingPoint> points;
};

// Evaluates both estimators after each prefix of the shared stream; `budgets`
// selects which prefix sizes are recorded as points (they are also scanned
// internally at every step for the zero-budget fields).
CountingReport counting_experiment(const ChainInstance& chain,
                                   const std::vector<std::size_t>& budgets,
                                   SampleSchedule schedule, std::uint64_t seed);

// The deterministic stream used by SampleSchedule::coverage_first, exposed
// for tests: first one x' of each y-parity per x (covers the 2n z cells),
// then the remaining x' values (covers the m y cells), then every cell not
// yet visited, row-major.
std::vector<std::pair<int, int>> coverage_first_stream(const ChainInstance& chain);

}  // namespace himo
