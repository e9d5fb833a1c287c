#pragma once

// One-step Markov reward process with a factored next state. The start state
// s ~ N(0, I_D) splits into s1 (first D1 components) and s2 (last D2). The
// successor is
//     s1' = MLP(s) + eps          (pure distractor; eps ~ N(0, noise_std^2))
//     s2' = heaviside(W s2 + b)   (small, deterministic, reward-relevant)
// and the terminal reward is r = (sum_i s1_i) * (sum_j s2'_j) / sqrt(D).
// Because s2' is a deterministic function of s, the true value of the start
// state is exactly r, which makes per-estimator value error measurable.

#include <cstdint>
#include <random>
#include <vector>

namespace himo {

struct MrpEpisode {
  std::vector<double> s;        // start state, length D
  std::vector<double> s_prime;  // successor state, length D
  double reward = 0.0;          // also the true value of s
};

class MrpInstance {
 public:
  // W, b and the distractor MLP weights are drawn once from the seed and
  // frozen; episodes only consume the rng passed to sample().
  MrpInstance(std::size_t D, std::size_t D2, std::size_t mlp_hidden, double noise_std,
              std::uint64_t seed);

  MrpEpisode sample(std::mt19937_64& rng) const;

  // Successor of a given start state with externally supplied distractor
  // noise (empty -> zero noise). Exposed for dependence checks in tests.
  std::vector<double> successor(const std::vector<double>& s,
                                const std::vector<double>& noise) const;
  double reward_of(const std::vector<double>& s, const std::vector<double>& s_prime) const;

  std::size_t dim() const { return D_; }
  std::size_t dim_useful() const { return D2_; }
  std::size_t dim_distractor() const { return D_ - D2_; }

 private:
  std::size_t D_, D2_;
  double noise_std_;
  std::vector<double> W_;   // [D2 x D2], row-major
  std::vector<double> b_;   // [D2]
  std::vector<double> w1_;  // [D x hidden]
  std::vector<double> b1_;  // [hidden]
  std::vector<double> w2_;  // [hidden x D1]
  std::vector<double> b2_;  // [D1]
};

struct MrpDefaults {
  std::size_t D = 32;
  std::size_t D2 = 4;
  std::size_t mlp_hidden = 16;  // both the instance distractor and learners
  std::size_t phi_dim = 3;
  std::size_t instances = 4;
  std::size_t repeats = 2;
  double noise_std = 1.0;
};

MrpDefaults mrp_default_config();

}  // namespace himo
