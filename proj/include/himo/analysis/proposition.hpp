#pragma once

// Numeric checker for the hindsight-value guarantee with a shared linear
// head. An instance is a finite, uniformly weighted set of data points
// (f_i, phi_i, G_i) plus a feature model phi_hat. The quantities:
//
//   v       least-squares fit of G on f alone          -> L_v
//   v_plus  least-squares fit of G on (f, phi), psi = (omega1, omega2, b)
//   v_m     the SAME psi applied to (f, phi_hat)       -> L_vm
//
// Premise:  C = L_vplus / L_v < 1/2   and
//           L_model < (1 - 2C) * L_v / (2 * ||omega2||^2)
// Claim:    L_vm < L_v.
//
// All losses are exact finite sums (closed form); a Monte-Carlo estimate
// over resampled points with standard errors is provided as a cross-check.

#include <cstdint>
#include <vector>

namespace himo {

struct PropositionInstance {
  std::size_t f_dim = 4;
  std::size_t phi_dim = 3;
  // per-point rows
  std::vector<std::vector<double>> f;
  std::vector<std::vector<double>> phi;
  std::vector<std::vector<double>> phi_hat;
  std::vector<double> g_return;
};

struct PropositionReport {
  double l_v = 0.0;
  double l_vplus = 0.0;
  double l_model = 0.0;
  double l_vm = 0.0;
  double c_ratio = 0.0;
  double omega2_norm_sq = 0.0;
  double threshold = 0.0;  // +inf when ||omega2||^2 == 0
  bool premise_holds = false;
  bool conclusion_holds = false;
  bool degenerate = false;  // L_v == 0: premise undefined
};

struct PropositionMcReport {
  std::size_t samples = 0;
  double l_v = 0.0, l_v_se = 0.0;
  double l_vplus = 0.0, l_vplus_se = 0.0;
  double l_model = 0.0, l_model_se = 0.0;
  double l_vm = 0.0, l_vm_se = 0.0;
};

// Random instance; with force_premise, the feature-model error is scaled to
// sit strictly below the premise threshold (margin drawn in (0.1, 0.9)).
PropositionInstance random_proposition_instance(std::uint64_t seed, bool force_premise = true,
                                                std::size_t points = 400);

PropositionReport proposition_check(const PropositionInstance& inst);

// Monte-Carlo re-estimate of the same losses by uniform resampling of the
// instance's points (>= 1e5 draws recommended).
PropositionMcReport proposition_check_mc(const PropositionInstance& inst, std::size_t samples,
                                         std::uint64_t seed);

// Dense least squares min ||X w - y||^2 via normal equations with partial
// pivoting. X is row-major [rows x cols], rows >= cols required.
std::vector<double> least_squares(const std::vector<double>& x, const std::vector<double>& y,
                                  std::size_t rows, std::size_t cols);

}  // namespace himo
