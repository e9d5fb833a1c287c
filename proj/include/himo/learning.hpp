#pragma once

// Loss construction, bootstrapped value targets, and the two training rules
// (on-policy advantage actor-critic and recurrent double-Q from replay).
//
// All targets are computed in plain double arithmetic from value snapshots,
// so they are constants with exactly zero gradient by construction. The
// combined objective is
//     L = L_v + alpha * L_vplus + beta * L_model
// where zero-weighted terms are skipped entirely (alpha = beta = 0 makes the
// combined loss *the same tensor* as L_v, which keeps the no-hindsight
// configuration bit-for-bit identical to a plain agent).

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "himo/adam.hpp"
#include "himo/nets.hpp"
#include "himo/tensor.hpp"
#include "himo/unroll.hpp"

namespace himo {

struct LossWeights {
  double alpha = 0.0;  // weight of the hindsight value loss
  double beta = 0.0;   // weight of the feature-model loss
};

enum class ModelLossKind { squared, xent };

struct TargetConfig {
  std::size_t n = 5;                  // n-step horizon / max lambda horizon
  double gamma = 0.99;
  double lambda = 0.7;                // Q(lambda) mixing
  bool use_rescale = false;           // apply g to Q targets
  double rescale_epsilon = 1e-3;
  long target_update_interval = 400;  // learner steps between target syncs
};

// --- invertible value rescaling ---
// g(x) = sign(x) * (sqrt(|x|+1) - 1) + eps * x
double value_rescale_g(double x, double eps);
double value_rescale_g_inverse(double y, double eps);

// --- targets (plain doubles; [T][B] layout) ---

using Rows = std::vector<std::vector<double>>;
using Mask = std::vector<std::vector<std::uint8_t>>;

// n-step returns: U_t = sum_{m<n_eff} (prod_{j<m} gamma*d_{t+j}) R_{t+m}
//                      + (prod_{j<n_eff} gamma*d_{t+j}) V_{t+n_eff},
// n_eff = min(n, T-t). `bootstrap` holds value estimates for states 0..T
// (one more row than rewards). A zero discount cuts everything behind it.
Rows nstep_target(const Rows& rewards, const Rows& discounts, const Rows& bootstrap,
                  std::size_t n, double gamma);

// Q(lambda) with double-Q bootstrapping and optional rescaling:
//   U^(n)_t = g( R-sum + (prod gamma*d) * g^{-1}(q_target[t+n][argmax_a q_online[t+n][a]]) )
//   U_t = sum_n w_n U^(n)_t,  w_n = (1-lambda) lambda^{n-1} except the
//   longest available n, which takes the whole remaining lambda^{n-1}.
// q_target/q_online: per-state action-value rows, [T+1] x (B*A).
Rows q_lambda_target(const Rows& rewards, const Rows& discounts,
                     const std::vector<std::vector<double>>& q_target,
                     const std::vector<std::vector<double>>& q_online, std::size_t n_actions,
                     const TargetConfig& cfg);

// --- losses (tensors; reduce over masked slots) ---

// 0.5 * mean over mask of (pred - target)^2. Empty mask -> constant 0.
Tensor value_loss(const std::vector<Tensor>& preds, const Rows& targets, const Mask& mask);

// mean over mask of ||phi - phi_hat||^2; the phi side is gradient-stopped.
Tensor model_loss_squared(const std::vector<Tensor>& phi, const std::vector<Tensor>& phi_hat,
                          const Mask& mask);

// mean over mask of H(softmax(phi), softmax(phi_hat)), phi side stopped;
// computed as logsumexp(phi_hat) - <p, phi_hat> for numerical stability.
Tensor model_loss_xent(const std::vector<Tensor>& phi, const std::vector<Tensor>& phi_hat,
                       const Mask& mask);

Tensor combined_loss(const Tensor& l_v, const Tensor& l_vplus, const Tensor& l_model,
                     const LossWeights& w);

// per-row action gather: sum_last(q * onehot(actions))
Tensor gather_actions(const Tensor& q, const std::vector<int>& actions);

// row-wise log-sum-exp, max-shifted ([B,A] -> [B])
Tensor logsumexp_rows(const Tensor& logits);

// row-wise policy entropy ([B,A] -> [B])
Tensor entropy_rows(const Tensor& logits);

// Draw from softmax(logits_row); deterministic given the rng state.
int sample_categorical(const double* logits_row, std::size_t n, std::mt19937_64& rng);

// --- optimiser over all partitions ---

struct Optimizer {
  AdamConfig config;
  std::vector<AdamState> states;  // aligned with flatten() order

  void init(const HimoParams& params);
  // Applies one Adam step per tensor; `watched` supplies the leaf ids that
  // key into `grads`. Unreached leaves carry exact zeros and leave their
  // parameters bitwise unchanged.
  void step(HimoParams& params, const HimoParams& watched, const GradMap& grads);
};

// --- metric trace ---

struct MetricTraceRow {
  long step = 0;
  double episode_return_mean = std::numeric_limits<double>::quiet_NaN();
  double l_v = 0.0;
  double l_vplus = 0.0;
  double l_model = 0.0;
  double value_error_vm = 0.0;
  double value_error_vplus = 0.0;
  double grad_norm = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  long env_step = 0;
};

inline constexpr const char* kMetricCsvHeader =
    "step,episode_return_mean,L_v,L_vplus,L_model,value_error_vm,value_error_vplus,"
    "grad_norm,epsilon,seed,env_step";

std::string format_double(double v);  // shortest round-trip representation
std::string format_metric_row(const MetricTraceRow& row);

// --- replay of fixed-length sequences ---

struct SequenceSample {
  UnrollBatch data;        // batch == 1
  std::vector<double> h0;  // carried recurrent state at the sequence start
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void add(SequenceSample s);
  std::size_t size() const { return full_ ? ring_.size() : head_; }
  std::size_t capacity() const { return ring_.size(); }
  bool ready(std::size_t batch) const { return size() >= batch; }

  // Uniform with replacement over complete stored sequences; the write head
  // is never straddled because entries are whole sequences.
  std::vector<const SequenceSample*> sample(std::size_t batch);

  static std::pair<UnrollBatch, std::vector<double>> assemble(
      const std::vector<const SequenceSample*>& seqs);

  // checkpoint access
  std::vector<SequenceSample> snapshot() const;
  void restore(std::vector<SequenceSample> entries, std::size_t head, bool full);
  std::size_t head() const { return head_; }
  bool wrapped() const { return full_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::vector<SequenceSample> ring_;
  std::size_t head_ = 0;
  bool full_ = false;
  std::mt19937_64 rng_;
};

// --- agents ---

struct AcAgent {
  HimoParams params;
  Optimizer opt;
  LossWeights weights;
  TargetConfig target_cfg;
  double entropy_coef = 0.01;
  ModelLossKind model_loss = ModelLossKind::xent;
  std::size_t k = 5;
  long learner_steps = 0;
};

struct UpdateResult {
  MetricTraceRow row;
  GradMap grads;  // by watched leaf node id (diagnostic)
};

// One on-policy update from a collected unroll. Targets are n-step returns
// bootstrapped from the v^m value snapshot; the advantage baseline is v^m
// only, so the policy term has exactly zero gradient into the hindsight
// partitions. Trains transitions 0..T-2; slot T-1 only provides bootstrap.
UpdateResult actor_critic_update(AcAgent& agent, const UnrollBatch& unroll,
                                 const std::vector<double>& h0_values);

struct QAgent {
  HimoParams params;
  HimoParams target_params;
  Optimizer opt;
  LossWeights weights;
  TargetConfig target_cfg;
  ModelLossKind model_loss = ModelLossKind::squared;
  std::size_t k = 5;
  std::size_t batch_size = 16;
  long learner_steps = 0;
  long last_target_sync = 0;
};

// One replayed double-Q update with Q(lambda) targets. Returns nothing when
// the buffer cannot fill a batch yet.
std::optional<UpdateResult> q_learning_update(QAgent& agent, ReplayBuffer& replay,
                                              double epsilon_for_trace);

// Linear epsilon anneal from start to end over `anneal_steps` env steps.
double epsilon_schedule(double start, double end, long anneal_steps, long env_step);

}  // namespace himo
