#pragma once

// Supervised value-estimation bundles for the one-step factored MRP, plus
// per-estimator value-error measurement. Three bundles are trained on the
// same episode stream:
//
//   direct       v_mf(s)                    plain regression on the reward
//   hindsight    phi(s'), v_plus(s, phi), phi_hat(s), v_m(s, sg(phi_hat))
//                with loss L_vm + alpha * L_vplus + beta * ||phi_hat-sg(phi)||^2
//                (same stop-gradient topology as the recurrent agent)
//   model-based  s_hat(s), v_mb(s, sg(s_hat)) with equal-weight value +
//                reconstruction losses (predicts the full noisy successor)
//
// All nets are 1-hidden-layer ReLU MLPs with the same hidden width. The
// value error of an estimator is the mean squared gap to the true start
// value, which for this MRP is exactly the (deterministic) reward.

#include <cstdint>
#include <random>
#include <vector>

#include "himo/adam.hpp"
#include "himo/envs/mrp.hpp"
#include "himo/learning.hpp"
#include "himo/tensor.hpp"

namespace himo {

struct MrpLearnerConfig {
  std::size_t D = 32;
  std::size_t D2 = 4;
  std::size_t hidden = 16;
  std::size_t phi_dim = 3;
  double alpha = 0.5;  // weight of the hindsight value loss
  double beta = 1.0;   // weight of the feature-model loss
  double lr = 5e-4;
};

struct MrpLearner {
  MrpLearnerConfig config;
  // partitions, each a [W1, b1, W2, b2] MLP
  Partition direct;    // D -> 1
  Partition eta2;      // D -> phi_dim        (feature model)
  Partition eta1;      // D + phi_dim -> 1    (deployable value head)
  Partition theta2;    // D -> phi_dim        (hindsight features, reads s')
  Partition theta1;    // D + phi_dim -> 1    (hindsight value head)
  Partition mb_model;  // D -> D              (successor predictor)
  Partition mb_value;  // 2D -> 1
  std::vector<AdamState> opt;  // aligned with flatten order below
};

struct MrpLossRow {
  double l_direct = 0.0;
  double l_vm = 0.0;
  double l_vplus = 0.0;
  double l_model = 0.0;
  double l_mb_value = 0.0;
  double l_mb_recon = 0.0;
};

struct MrpErrors {
  double v_direct = 0.0;
  double v_m = 0.0;
  double v_plus = 0.0;       // uses the privileged true successor
  double model_based = 0.0;
};

std::vector<Tensor*> mrp_flatten(MrpLearner& l);
MrpLearner init_mrp_learner(const MrpLearnerConfig& config, std::uint64_t seed);

// One Adam step on all three bundles from a batch of episodes.
MrpLossRow mrp_train_step(MrpLearner& learner, const std::vector<MrpEpisode>& batch);

// Mean squared value error per estimator over fresh episodes.
MrpErrors mrp_value_errors(const MrpLearner& learner, const MrpInstance& instance,
                           std::size_t n_states, std::mt19937_64& rng);

inline constexpr const char* kMrpErrorCsvHeader =
    "step,v_direct,v_m,v_plus,model_based,instance,repeat";

}  // namespace himo
