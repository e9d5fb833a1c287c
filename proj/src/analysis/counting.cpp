#include "himo/analysis/counting.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "himo/rng.hpp"

namespace himo {

std::vector<std::pair<int, int>> coverage_first_stream(const ChainInstance& chain) {
  const int n = static_cast<int>(chain.n_x());
  const int m = static_cast<int>(chain.n_x_prime());

  // first x' landing on each y value, in x' order
  int xp_y0 = -1, xp_y1 = -1;
  for (int xp = 0; xp < m; ++xp) {
    if (chain.y_of(xp) == 0 && xp_y0 < 0) xp_y0 = xp;
    if (chain.y_of(xp) == 1 && xp_y1 < 0) xp_y1 = xp;
  }

  std::vector<std::pair<int, int>> stream;
  std::set<std::pair<int, int>> seen;
  auto push = [&](int x, int xp) {
    if (seen.insert({x, xp}).second) stream.emplace_back(x, xp);
  };

  for (int x = 0; x < n; ++x) {
    if (xp_y0 >= 0) push(x, xp_y0);
    if (xp_y1 >= 0) push(x, xp_y1);
  }
  for (int xp = 0; xp < m; ++xp) push(0, xp);
  for (int x = 0; x < n; ++x)
    for (int xp = 0; xp < m; ++xp) push(x, xp);
  return stream;
}

CountingReport counting_experiment(const ChainInstance& chain,
                                   const std::vector<std::size_t>& budgets,
                                   SampleSchedule schedule, std::uint64_t seed) {
  const std::size_t n = chain.n_x(), m = chain.n_x_prime();
  const std::size_t nm = n * m;

  CountingReport rep;
  rep.joint_table_cells = nm;
  rep.factored_table_cells = m + 2 * n;

  // estimator state
  std::vector<std::uint8_t> joint_seen(nm, 0);
  std::vector<double> joint_value(nm, 0.0);
  std::vector<std::uint8_t> y_seen(m, 0);
  std::vector<int> y_est(m, 0);
  std::vector<std::uint8_t> z_seen(n * 2, 0);
  std::vector<double> z_est(n * 2, 0.0);
  std::size_t joint_count = 0, y_count = 0, z_count = 0;

  auto joint_mse = [&] {
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t xp = 0; xp < m; ++xp) {
        const double truth = chain.z_of(static_cast<int>(x), chain.y_of(static_cast<int>(xp)));
        const double pred = joint_seen[x * m + xp] ? joint_value[x * m + xp] : 0.0;
        acc += (pred - truth) * (pred - truth);
      }
    return acc / static_cast<double>(nm);
  };
  auto factored_mse = [&] {
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t xp = 0; xp < m; ++xp) {
        const double truth = chain.z_of(static_cast<int>(x), chain.y_of(static_cast<int>(xp)));
        double pred = 0.0;
        if (y_seen[xp]) {
          const std::size_t cell = x * 2 + static_cast<std::size_t>(y_est[xp]);
          if (z_seen[cell]) pred = z_est[cell];
        }
        acc += (pred - truth) * (pred - truth);
      }
    return acc / static_cast<double>(nm);
  };

  std::vector<std::pair<int, int>> fixed_stream;
  std::mt19937_64 rng(seed);
  std::size_t max_budget = 0;
  for (const std::size_t b : budgets) max_budget = std::max(max_budget, b);
  if (schedule == SampleSchedule::coverage_first) {
    fixed_stream = coverage_first_stream(chain);
    max_budget = std::max(max_budget, fixed_stream.size());
  }

  std::vector<std::size_t> sorted_budgets = budgets;
  std::sort(sorted_budgets.begin(), sorted_budgets.end());
  std::size_t next_budget = 0;

  auto record_point = [&](std::size_t budget) {
    CountingPoint pt;
    pt.budget = budget;
    pt.joint_mse = joint_mse();
    pt.factored_mse = factored_mse();
    pt.joint_cells_seen = joint_count;
    pt.factored_cells_seen = y_count + z_count;
    rep.points.push_back(pt);
  };

  for (std::size_t t = 0; t < max_budget; ++t) {
    ChainSample s;
    if (schedule == SampleSchedule::coverage_first) {
      if (t < fixed_stream.size())
        s = chain.at(fixed_stream[t].first, fixed_stream[t].second);
      else
        s = chain.sample(rng);
    } else {
      s = chain.sample(rng);
    }

    const std::size_t jcell =
        static_cast<std::size_t>(s.x) * m + static_cast<std::size_t>(s.x_prime);
    if (!joint_seen[jcell]) {
      joint_seen[jcell] = 1;
      joint_count += 1;
    }
    joint_value[jcell] = s.z;  // noiseless: any visit pins the exact value

    if (!y_seen[static_cast<std::size_t>(s.x_prime)]) {
      y_seen[static_cast<std::size_t>(s.x_prime)] = 1;
      y_count += 1;
    }
    y_est[static_cast<std::size_t>(s.x_prime)] = s.y_prime;
    const std::size_t zcell =
        static_cast<std::size_t>(s.x) * 2 + static_cast<std::size_t>(s.y_prime);
    if (!z_seen[zcell]) {
      z_seen[zcell] = 1;
      z_count += 1;
    }
    z_est[zcell] = s.z;

    const std::size_t consumed = t + 1;
    if (rep.factored_zero_budget == 0 && factored_mse() == 0.0)
      rep.factored_zero_budget = consumed;
    if (rep.joint_zero_budget == 0 && joint_mse() == 0.0) rep.joint_zero_budget = consumed;
    while (next_budget < sorted_budgets.size() && sorted_budgets[next_budget] == consumed) {
      record_point(consumed);
      next_budget += 1;
    }
  }
  return rep;
}

}  // namespace himo
