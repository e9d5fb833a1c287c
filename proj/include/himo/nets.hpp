#pragma once

// The agent network: a single-layer GRU state core feeding
//  * a current-state feature head phi_hat (the model),
//  * a value head for v^m (optionally dueling action values) whose feature
//    input is always the gradient-stopped phi_hat,
//  * an optional policy head reading the same trunk,
//  * a hindsight feature head phi applied to the stopped *future* state, and
//    a separate value head for v^+ reading the stopped current state plus
//    phi.
//
// Parameters are split into named partitions so the three losses can be
// verified to touch exactly the partitions they are supposed to:
//   eta3   state core (GRU)
//   eta2   phi_hat
//   eta1   v^m head (trunk + value, plus advantage column for action values)
//   theta2 phi
//   theta1 v^+ head
//   pi     policy readout (optional)

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "himo/tensor.hpp"
#include "himo/unroll.hpp"

namespace himo {

enum class HeadKind { state_value, action_value };

struct NetConfig {
  std::size_t obs_dim = 0;
  std::size_t core_hidden = 64;   // recurrent state size
  std::size_t d = 3;              // feature bottleneck width
  std::size_t phi_hidden = 64;
  std::size_t phi_hat_hidden = 64;
  std::size_t head_hidden = 64;
  std::size_t n_actions = 0;      // required for action_value or with_policy
  HeadKind head_kind = HeadKind::state_value;
  bool with_policy = false;
};

using Partition = std::vector<Tensor>;

struct HimoParams {
  Partition eta3, eta2, eta1, theta2, theta1, pi;
  NetConfig config;
};

// Fixed tensor positions inside each partition.
namespace pidx {
// eta3 (GRU)
inline constexpr std::size_t Wz = 0, Uz = 1, bz = 2, Wr = 3, Ur = 4, br = 5, Wn = 6, Un = 7,
                             bn = 8;
// two-layer MLPs (eta2, theta2, theta1)
inline constexpr std::size_t W1 = 0, b1 = 1, W2 = 2, b2 = 3;
// eta1: trunk + value (+ advantage for action_value)
inline constexpr std::size_t Wv = 2, bv = 3, Wa = 4, ba = 5;
// pi
inline constexpr std::size_t Wp = 0, bp = 1;
}  // namespace pidx

// Deterministic initialisation: orthogonal recurrent matrices, fan-in-scaled
// uniform feedforward weights, zero biases. Same seed -> bitwise-equal
// parameters.
HimoParams init_params(const NetConfig& config, std::uint64_t seed);

// Names for serialisation, aligned with partition tensor order.
std::vector<std::string> partition_tensor_names(const std::string& partition,
                                                const NetConfig& config);

// Registers every tensor of `params` on `tape` (fixed order: eta3, eta2,
// eta1, theta2, theta1, pi) and returns the tracked copy.
HimoParams watch(Tape& tape, const HimoParams& params);

// Flat views in watch order, for optimisers and checkpoints.
std::vector<Tensor*> flatten(HimoParams& params);
std::vector<const Tensor*> flatten(const HimoParams& params);

// --- building blocks ---

// One-hidden-layer MLP [W1,b1,W2,b2] with relu hidden and linear output,
// initialised like the feedforward parts of the main net.
Partition make_mlp(std::mt19937_64& rng, std::size_t in, std::size_t hidden, std::size_t out);
Tensor mlp_forward(const Partition& p, const Tensor& x);

Tensor orthogonal_matrix(std::mt19937_64& rng, std::size_t n);

// GRU step. h_prev and o may be single vectors ([H], [obs]) or batched
// rows ([B,H], [B,obs]). episode_start replaces h_prev with zeros.
//   z = sigmoid(o Wz + h Uz + bz)
//   r = sigmoid(o Wr + h Ur + br)
//   n = tanh(o Wn + (r*h) Un + bn)
//   h' = (1-z)*h + z*n
Tensor state_step(const Partition& eta3, const Tensor& h_prev, const Tensor& o,
                  bool episode_start);
// Batched variant: keep[b] == 0 zeroes stream b's carried state first.
Tensor state_step_masked(const Partition& eta3, const Tensor& h_prev, const Tensor& o,
                         const Tensor& keep_col);  // keep_col: [B,1]

Tensor phi_forward(const Partition& theta2, const Tensor& h);      // -> [B,d]
Tensor phi_hat_forward(const Partition& eta2, const Tensor& h);    // -> [B,d]

// v^m head. trunk = relu(concat(h, feat) W1 + b1); value from the trunk is
// a scalar per row, or per-action values via the dueling decomposition
// q = v + (a - mean(a)) for action_value nets.
Tensor head_trunk(const Partition& eta1, const Tensor& h, const Tensor& feat);
Tensor value_from_trunk(const Partition& eta1, const Tensor& trunk, HeadKind kind);
Tensor value_head(const Partition& eta1, HeadKind kind, const Tensor& h, const Tensor& feat);
Tensor policy_logits_from_trunk(const Partition& pi, const Tensor& trunk);

// v^+ head: plain MLP on concat(h, phi); scalar or per-action output.
Tensor vplus_head(const Partition& theta1, const Tensor& h, const Tensor& phi);

struct UnrollOptions {
  bool want_hindsight = false;  // compute phi at valid offsets
  bool want_vplus = false;      // also compute v^+ (implies want_hindsight)
  bool want_policy = false;
};

struct ForwardOutputs {
  std::vector<Tensor> h;              // T x [B,H]
  std::vector<Tensor> phi_hat;        // T x [B,d]
  std::vector<Tensor> trunk;          // T x [B,head_hidden]
  std::vector<Tensor> v_m;            // T x [B] (or [B,A])
  std::vector<Tensor> policy_logits;  // T x [B,A] when requested
  std::vector<Tensor> phi;            // T x [B,d]; empty tensor when t+k is outside
  std::vector<Tensor> v_plus;         // T x [B] (or [B,A]); empty likewise
  std::vector<std::vector<std::uint8_t>> hindsight_valid;  // [T][B]
};

// Runs the core over the whole unroll and applies the heads.
//   h_t       from state_step over o_t with per-stream episode resets
//   phi_hat_t = phi_hat(h_t)
//   v^m_t     = value head over (h_t, stop_gradient(phi_hat_t))
//   phi_t     = phi(stop_gradient(h_{t+k}))           (where t+k fits)
//   v^+_t     = v^+ head over (stop_gradient(h_t), phi_t)
// h0 is the carried state for slot 0 (values only; gradients never cross
// unroll boundaries). k >= length simply yields all-invalid hindsight masks.
ForwardOutputs forward_unroll(const HimoParams& params, const UnrollBatch& u, const Tensor& h0,
                              std::size_t k, const UnrollOptions& opt);

}  // namespace himo
