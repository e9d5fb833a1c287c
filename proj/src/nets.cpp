#include "himo/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace himo {

UnrollBatch UnrollBatch::empty(std::size_t length, std::size_t batch, std::size_t obs_dim) {
  UnrollBatch u;
  u.length = length;
  u.batch = batch;
  u.obs_dim = obs_dim;
  u.obs.assign(length, std::vector<double>(batch * obs_dim, 0.0));
  u.actions.assign(length, std::vector<int>(batch, 0));
  u.rewards.assign(length, std::vector<double>(batch, 0.0));
  u.discounts.assign(length, std::vector<double>(batch, 1.0));
  u.episode_start.assign(length, std::vector<std::uint8_t>(batch, 0));
  return u;
}

std::vector<std::vector<std::uint8_t>> hindsight_valid_mask(const UnrollBatch& u, std::size_t k) {
  std::vector<std::vector<std::uint8_t>> valid(u.length,
                                               std::vector<std::uint8_t>(u.batch, 0));
  if (k == 0 || k >= u.length) return valid;  // k=0 is never a lookahead; k>=T never fits
  for (std::size_t b = 0; b < u.batch; ++b) {
    for (std::size_t t = 0; t + k < u.length; ++t) {
      bool crosses = false;
      for (std::size_t s = t + 1; s <= t + k; ++s) {
        if (u.episode_start[s][b]) {
          crosses = true;
          break;
        }
      }
      valid[t][b] = crosses ? 0 : 1;
    }
  }
  return valid;
}

// ---------------------------------------------------------------------------
// Initialisation
// ---------------------------------------------------------------------------

namespace {

Tensor uniform_fanin(std::mt19937_64& rng, std::size_t in, std::size_t out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(in * out);
  for (auto& x : v) x = dist(rng);
  return Tensor({in, out}, std::move(v));
}

void check_head_config(const NetConfig& c) {
  if (c.obs_dim == 0 || c.core_hidden == 0 || c.d == 0 || c.phi_hidden == 0 ||
      c.phi_hat_hidden == 0 || c.head_hidden == 0)
    throw std::invalid_argument("net config: all sizes must be positive");
  if ((c.head_kind == HeadKind::action_value || c.with_policy) && c.n_actions == 0)
    throw std::invalid_argument("net config: n_actions required for this head");
}

}  // namespace

Tensor orthogonal_matrix(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(n * n);
  for (auto& x : a) x = normal(rng);
  // Modified Gram-Schmidt on columns; the resulting Q has det-sign fixed by
  // the positive column norms it divides through.
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < j; ++p) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += a[i * n + p] * a[i * n + j];
      for (std::size_t i = 0; i < n; ++i) a[i * n + j] -= dot * a[i * n + p];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += a[i * n + j] * a[i * n + j];
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw std::runtime_error("orthogonal init: degenerate column");
    for (std::size_t i = 0; i < n; ++i) a[i * n + j] /= norm;
  }
  return Tensor({n, n}, std::move(a));
}

Partition make_mlp(std::mt19937_64& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  Partition p;
  p.push_back(uniform_fanin(rng, in, hidden));
  p.push_back(Tensor::zeros({hidden}));
  p.push_back(uniform_fanin(rng, hidden, out));
  p.push_back(Tensor::zeros({out}));
  return p;
}

Tensor mlp_forward(const Partition& p, const Tensor& x) {
  Tensor z = relu(add(matmul(x, p[pidx::W1]), p[pidx::b1]));
  return add(matmul(z, p[pidx::W2]), p[pidx::b2]);
}

HimoParams init_params(const NetConfig& config, std::uint64_t seed) {
  check_head_config(config);
  std::mt19937_64 rng(seed);
  const std::size_t O = config.obs_dim, H = config.core_hidden, D = config.d;

  HimoParams params;
  params.config = config;

  // eta3: GRU
  for (int gate = 0; gate < 3; ++gate) {
    params.eta3.push_back(uniform_fanin(rng, O, H));
    params.eta3.push_back(orthogonal_matrix(rng, H));
    params.eta3.push_back(Tensor::zeros({H}));
  }

  // eta2: phi_hat
  params.eta2 = make_mlp(rng, H, config.phi_hat_hidden, D);

  // eta1: trunk + value (+ advantage)
  params.eta1.push_back(uniform_fanin(rng, H + D, config.head_hidden));
  params.eta1.push_back(Tensor::zeros({config.head_hidden}));
  params.eta1.push_back(uniform_fanin(rng, config.head_hidden, 1));
  params.eta1.push_back(Tensor::zeros({1}));
  if (config.head_kind == HeadKind::action_value) {
    params.eta1.push_back(uniform_fanin(rng, config.head_hidden, config.n_actions));
    params.eta1.push_back(Tensor::zeros({config.n_actions}));
  }

  // theta2: phi
  params.theta2 = make_mlp(rng, H, config.phi_hidden, D);

  // theta1: v^+ head
  const std::size_t out = config.head_kind == HeadKind::action_value ? config.n_actions : 1;
  params.theta1 = make_mlp(rng, H + D, config.head_hidden, out);

  if (config.with_policy) {
    params.pi.push_back(uniform_fanin(rng, config.head_hidden, config.n_actions));
    params.pi.push_back(Tensor::zeros({config.n_actions}));
  }
  return params;
}

std::vector<std::string> partition_tensor_names(const std::string& partition,
                                                const NetConfig& config) {
  if (partition == "eta3")
    return {"Wz", "Uz", "bz", "Wr", "Ur", "br", "Wn", "Un", "bn"};
  if (partition == "eta2" || partition == "theta2" || partition == "theta1")
    return {"W1", "b1", "W2", "b2"};
  if (partition == "eta1") {
    if (config.head_kind == HeadKind::action_value)
      return {"W1", "b1", "Wv", "bv", "Wa", "ba"};
    return {"W1", "b1", "Wv", "bv"};
  }
  if (partition == "pi") {
    if (config.with_policy) return {"Wp", "bp"};
    return {};
  }
  throw std::invalid_argument("unknown partition: " + partition);
}

HimoParams watch(Tape& tape, const HimoParams& params) {
  HimoParams w;
  w.config = params.config;
  auto track = [&tape](const Partition& src, Partition& dst) {
    dst.reserve(src.size());
    for (const auto& t : src) dst.push_back(tape.leaf(t));
  };
  track(params.eta3, w.eta3);
  track(params.eta2, w.eta2);
  track(params.eta1, w.eta1);
  track(params.theta2, w.theta2);
  track(params.theta1, w.theta1);
  track(params.pi, w.pi);
  return w;
}

std::vector<Tensor*> flatten(HimoParams& params) {
  std::vector<Tensor*> all;
  for (auto* part : {&params.eta3, &params.eta2, &params.eta1, &params.theta2, &params.theta1,
                     &params.pi})
    for (auto& t : *part) all.push_back(&t);
  return all;
}

std::vector<const Tensor*> flatten(const HimoParams& params) {
  std::vector<const Tensor*> all;
  for (const auto* part : {&params.eta3, &params.eta2, &params.eta1, &params.theta2,
                           &params.theta1, &params.pi})
    for (const auto& t : *part) all.push_back(&t);
  return all;
}

// ---------------------------------------------------------------------------
// Forward pieces
// ---------------------------------------------------------------------------

namespace {

Tensor gru_core(const Partition& g, const Tensor& h, const Tensor& o) {
  using namespace pidx;
  Tensor z = sigmoid(add(add(matmul(o, g[Wz]), matmul(h, g[Uz])), g[bz]));
  Tensor r = sigmoid(add(add(matmul(o, g[Wr]), matmul(h, g[Ur])), g[br]));
  Tensor n = tanh(add(add(matmul(o, g[Wn]), matmul(mul(r, h), g[Un])), g[bn]));
  Tensor one_minus_z = sub(Tensor::scalar(1.0), z);
  return add(mul(one_minus_z, h), mul(z, n));
}

}  // namespace

Tensor state_step(const Partition& eta3, const Tensor& h_prev, const Tensor& o,
                  bool episode_start) {
  if (episode_start) return gru_core(eta3, Tensor::zeros(h_prev.shape), o);
  return gru_core(eta3, h_prev, o);
}

Tensor state_step_masked(const Partition& eta3, const Tensor& h_prev, const Tensor& o,
                         const Tensor& keep_col) {
  return gru_core(eta3, mul(h_prev, keep_col), o);
}

Tensor phi_forward(const Partition& theta2, const Tensor& h) { return mlp_forward(theta2, h); }

Tensor phi_hat_forward(const Partition& eta2, const Tensor& h) { return mlp_forward(eta2, h); }

Tensor head_trunk(const Partition& eta1, const Tensor& h, const Tensor& feat) {
  Tensor in = concat(h, feat);
  return relu(add(matmul(in, eta1[pidx::W1]), eta1[pidx::b1]));
}

Tensor value_from_trunk(const Partition& eta1, const Tensor& trunk, HeadKind kind) {
  Tensor v = add(matmul(trunk, eta1[pidx::Wv]), eta1[pidx::bv]);  // [B,1] or [1]
  if (kind == HeadKind::state_value) {
    if (v.rank() == 2) return reshape(v, {v.shape[0]});
    return reshape(v, {});
  }
  Tensor a = add(matmul(trunk, eta1[pidx::Wa]), eta1[pidx::ba]);  // [B,A] or [A]
  Tensor centered;
  if (a.rank() == 2) {
    Tensor a_mean = reshape(mean_last(a), {a.shape[0], 1});
    centered = sub(a, a_mean);
  } else {
    centered = sub(a, mean_last(a));
  }
  return add(centered, v);  // column-broadcast of v over actions
}

Tensor value_head(const Partition& eta1, HeadKind kind, const Tensor& h, const Tensor& feat) {
  return value_from_trunk(eta1, head_trunk(eta1, h, feat), kind);
}

Tensor policy_logits_from_trunk(const Partition& pi, const Tensor& trunk) {
  return add(matmul(trunk, pi[pidx::Wp]), pi[pidx::bp]);
}

Tensor vplus_head(const Partition& theta1, const Tensor& h, const Tensor& phi) {
  Tensor out = mlp_forward(theta1, concat(h, phi));
  if (out.rank() == 2 && out.shape[1] == 1) return reshape(out, {out.shape[0]});
  if (out.rank() == 1 && out.shape[0] == 1) return reshape(out, {});
  return out;
}

ForwardOutputs forward_unroll(const HimoParams& params, const UnrollBatch& u, const Tensor& h0,
                              std::size_t k, const UnrollOptions& opt) {
  const NetConfig& cfg = params.config;
  const std::size_t T = u.length, B = u.batch, H = cfg.core_hidden;
  if (h0.shape != Shape{B, H})
    throw ShapeError("forward_unroll: h0 is " + shape_str(h0.shape) + ", want " +
                     shape_str({B, H}));
  if (u.obs_dim != cfg.obs_dim)
    throw ShapeError("forward_unroll: unroll obs_dim " + std::to_string(u.obs_dim) +
                     " vs net obs_dim " + std::to_string(cfg.obs_dim));

  ForwardOutputs out;
  out.h.reserve(T);
  out.phi_hat.reserve(T);
  out.trunk.reserve(T);
  out.v_m.reserve(T);
  out.hindsight_valid = hindsight_valid_mask(u, k);

  Tensor h = h0;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor o(Shape{B, cfg.obs_dim}, u.obs[t]);
    std::vector<double> keep(B);
    for (std::size_t b = 0; b < B; ++b) keep[b] = u.episode_start[t][b] ? 0.0 : 1.0;
    h = state_step_masked(params.eta3, h, o, Tensor({B, 1}, std::move(keep)));
    out.h.push_back(h);

    Tensor ph = phi_hat_forward(params.eta2, h);
    out.phi_hat.push_back(ph);

    Tensor trunk = head_trunk(params.eta1, h, stop_gradient(ph));
    out.trunk.push_back(trunk);
    out.v_m.push_back(value_from_trunk(params.eta1, trunk, cfg.head_kind));
    if (opt.want_policy) {
      if (params.pi.empty()) throw TapeError("forward_unroll: policy requested but absent");
      out.policy_logits.push_back(policy_logits_from_trunk(params.pi, trunk));
    }
  }

  const bool hindsight = opt.want_hindsight || opt.want_vplus;
  out.phi.assign(T, Tensor{});
  out.v_plus.assign(T, Tensor{});
  if (hindsight) {
    for (std::size_t t = 0; t + k < T; ++t) {
      out.phi[t] = phi_forward(params.theta2, stop_gradient(out.h[t + k]));
      if (opt.want_vplus)
        out.v_plus[t] = vplus_head(params.theta1, stop_gradient(out.h[t]), out.phi[t]);
    }
  }
  return out;
}

}  // namespace himo
