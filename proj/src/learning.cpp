#include "himo/learning.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace himo {

double value_rescale_g(double x, double eps) {
  const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  return s * (std::sqrt(std::fabs(x) + 1.0) - 1.0) + eps * x;
}

double value_rescale_g_inverse(double y, double eps) {
  const double s = y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0);
  const double a = std::fabs(y);
  const double u = (std::sqrt(1.0 + 4.0 * eps * (a + 1.0 + eps)) - 1.0) / (2.0 * eps);
  return s * (u * u - 1.0);
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

namespace {

void check_rows(const char* who, const Rows& r, std::size_t t, std::size_t b) {
  if (r.size() != t) throw std::invalid_argument(std::string(who) + ": wrong number of rows");
  for (const auto& row : r)
    if (row.size() != b) throw std::invalid_argument(std::string(who) + ": ragged rows");
}

}  // namespace

Rows nstep_target(const Rows& rewards, const Rows& discounts, const Rows& bootstrap,
                  std::size_t n, double gamma) {
  const std::size_t T = rewards.size();
  if (T == 0) return {};
  const std::size_t B = rewards[0].size();
  check_rows("nstep_target rewards", rewards, T, B);
  check_rows("nstep_target discounts", discounts, T, B);
  check_rows("nstep_target bootstrap", bootstrap, T + 1, B);
  if (n == 0) throw std::invalid_argument("nstep_target: n must be >= 1");

  Rows target(T, std::vector<double>(B, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t n_eff = std::min(n, T - t);
    for (std::size_t b = 0; b < B; ++b) {
      double acc = 0.0, cum = 1.0;
      for (std::size_t m = 0; m < n_eff; ++m) {
        acc += cum * rewards[t + m][b];
        cum *= gamma * discounts[t + m][b];
      }
      target[t][b] = acc + cum * bootstrap[t + n_eff][b];
    }
  }
  return target;
}

Rows q_lambda_target(const Rows& rewards, const Rows& discounts,
                     const std::vector<std::vector<double>>& q_target,
                     const std::vector<std::vector<double>>& q_online, std::size_t n_actions,
                     const TargetConfig& cfg) {
  const std::size_t T = rewards.size();
  if (T == 0) return {};
  const std::size_t B = rewards[0].size();
  check_rows("q_lambda rewards", rewards, T, B);
  check_rows("q_lambda discounts", discounts, T, B);
  if (q_target.size() != T + 1 || q_online.size() != T + 1)
    throw std::invalid_argument("q_lambda_target: need T+1 action-value rows");
  if (cfg.n == 0) throw std::invalid_argument("q_lambda_target: n must be >= 1");

  const double eps = cfg.rescale_epsilon;
  auto g = [&](double x) { return cfg.use_rescale ? value_rescale_g(x, eps) : x; };
  auto g_inv = [&](double y) { return cfg.use_rescale ? value_rescale_g_inverse(y, eps) : y; };

  Rows target(T, std::vector<double>(B, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t n_hi = std::min(cfg.n, T - t);
    for (std::size_t b = 0; b < B; ++b) {
      double acc = 0.0, cum = 1.0, mixed = 0.0;
      for (std::size_t n = 1; n <= n_hi; ++n) {
        acc += cum * rewards[t + n - 1][b];
        cum *= cfg.gamma * discounts[t + n - 1][b];
        const std::size_t j = t + n;
        const double* online = q_online[j].data() + b * n_actions;
        std::size_t best = 0;
        for (std::size_t a = 1; a < n_actions; ++a)
          if (online[a] > online[best]) best = a;  // ties keep the lowest index
        const double boot = q_target[j][b * n_actions + best];
        const double u_n = g(acc + cum * g_inv(boot));
        const double w = (n == n_hi) ? std::pow(cfg.lambda, static_cast<double>(n - 1))
                                     : (1.0 - cfg.lambda) *
                                           std::pow(cfg.lambda, static_cast<double>(n - 1));
        mixed += w * u_n;
      }
      target[t][b] = mixed;
    }
  }
  return target;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace {

std::size_t mask_count(const Mask& mask) {
  std::size_t c = 0;
  for (const auto& row : mask)
    for (auto m : row) c += m ? 1 : 0;
  return c;
}

}  // namespace

Tensor value_loss(const std::vector<Tensor>& preds, const Rows& targets, const Mask& mask) {
  if (preds.size() != targets.size() || mask.size() != targets.size())
    throw std::invalid_argument("value_loss: preds/targets/mask length mismatch");
  const std::size_t count = mask_count(mask);
  if (count == 0) return Tensor::scalar(0.0);

  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    bool any = false;
    for (auto m : mask[t])
      if (m) { any = true; break; }
    if (!any) continue;
    const std::size_t B = targets[t].size();
    std::vector<double> mrow(B);
    for (std::size_t b = 0; b < B; ++b) mrow[b] = mask[t][b] ? 1.0 : 0.0;
    Tensor diff = sub(preds[t], Tensor({B}, targets[t]));
    Tensor masked = mul(square(diff), Tensor({B}, std::move(mrow)));
    acc = add(acc, sum(masked));
  }
  return mul(acc, Tensor::scalar(0.5 / static_cast<double>(count)));
}

Tensor model_loss_squared(const std::vector<Tensor>& phi, const std::vector<Tensor>& phi_hat,
                          const Mask& mask) {
  const std::size_t count = mask_count(mask);
  if (count == 0) return Tensor::scalar(0.0);

  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < mask.size(); ++t) {
    bool any = false;
    for (auto m : mask[t])
      if (m) { any = true; break; }
    if (!any) continue;
    const std::size_t B = mask[t].size();
    std::vector<double> mcol(B);
    for (std::size_t b = 0; b < B; ++b) mcol[b] = mask[t][b] ? 1.0 : 0.0;
    Tensor diff = sub(phi_hat[t], stop_gradient(phi[t]));
    Tensor masked = mul(square(diff), Tensor({B, 1}, std::move(mcol)));
    acc = add(acc, sum(masked));
  }
  return mul(acc, Tensor::scalar(1.0 / static_cast<double>(count)));
}

Tensor model_loss_xent(const std::vector<Tensor>& phi, const std::vector<Tensor>& phi_hat,
                       const Mask& mask) {
  const std::size_t count = mask_count(mask);
  if (count == 0) return Tensor::scalar(0.0);

  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < mask.size(); ++t) {
    bool any = false;
    for (auto m : mask[t])
      if (m) { any = true; break; }
    if (!any) continue;
    const std::size_t B = mask[t].size();
    const std::size_t D = phi[t].shape[1];

    // target distribution p = softmax(phi), fixed (the phi side is stopped)
    std::vector<double> p(B * D);
    for (std::size_t b = 0; b < B; ++b) {
      const double* row = phi[t].values.data() + b * D;
      double mx = row[0];
      for (std::size_t j = 1; j < D; ++j) mx = std::max(mx, row[j]);
      double z = 0.0;
      for (std::size_t j = 0; j < D; ++j) {
        p[b * D + j] = std::exp(row[j] - mx);
        z += p[b * D + j];
      }
      for (std::size_t j = 0; j < D; ++j) p[b * D + j] /= z;
    }

    Tensor lse = logsumexp_rows(phi_hat[t]);                                // [B]
    Tensor dot = sum_last(mul(Tensor({B, D}, std::move(p)), phi_hat[t]));   // [B]
    Tensor row_loss = sub(lse, dot);

    std::vector<double> mrow(B);
    for (std::size_t b = 0; b < B; ++b) mrow[b] = mask[t][b] ? 1.0 : 0.0;
    acc = add(acc, sum(mul(row_loss, Tensor({B}, std::move(mrow)))));
  }
  return mul(acc, Tensor::scalar(1.0 / static_cast<double>(count)));
}

Tensor combined_loss(const Tensor& l_v, const Tensor& l_vplus, const Tensor& l_model,
                     const LossWeights& w) {
  Tensor total = l_v;
  if (w.alpha != 0.0) total = add(total, mul(Tensor::scalar(w.alpha), l_vplus));
  if (w.beta != 0.0) total = add(total, mul(Tensor::scalar(w.beta), l_model));
  return total;
}

Tensor gather_actions(const Tensor& q, const std::vector<int>& actions) {
  if (q.rank() != 2) throw ShapeError("gather_actions: want [B,A], got " + shape_str(q.shape));
  const std::size_t B = q.shape[0], A = q.shape[1];
  if (actions.size() != B) throw ShapeError("gather_actions: action count mismatch");
  std::vector<double> onehot(B * A, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    const int a = actions[b];
    if (a < 0 || static_cast<std::size_t>(a) >= A)
      throw std::out_of_range("gather_actions: action out of range");
    onehot[b * A + static_cast<std::size_t>(a)] = 1.0;
  }
  return sum_last(mul(q, Tensor({B, A}, std::move(onehot))));
}

Tensor logsumexp_rows(const Tensor& logits) {
  if (logits.rank() != 2)
    throw ShapeError("logsumexp_rows: want [B,A], got " + shape_str(logits.shape));
  const std::size_t B = logits.shape[0], A = logits.shape[1];
  std::vector<double> mx(B);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.values.data() + b * A;
    double m = row[0];
    for (std::size_t j = 1; j < A; ++j) m = std::max(m, row[j]);
    mx[b] = m;
  }
  Tensor shifted = sub(logits, Tensor({B, 1}, mx));
  return add(log(sum_last(exp(shifted))), Tensor({B}, std::move(mx)));
}

Tensor entropy_rows(const Tensor& logits) {
  Tensor lse = logsumexp_rows(logits);
  Tensor p = softmax(logits);
  return sub(lse, sum_last(mul(p, logits)));
}

int sample_categorical(const double* logits_row, std::size_t n, std::mt19937_64& rng) {
  double mx = logits_row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits_row[j]);
  double z = 0.0;
  std::vector<double> e(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = std::exp(logits_row[j] - mx);
    z += e[j];
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * z;
  double c = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    c += e[j];
    if (u < c) return static_cast<int>(j);
  }
  return static_cast<int>(n - 1);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

void Optimizer::init(const HimoParams& params) {
  states.clear();
  for (const Tensor* t : flatten(params)) states.emplace_back(t->shape, config);
}

void Optimizer::step(HimoParams& params, const HimoParams& watched, const GradMap& grads) {
  auto ps = flatten(params);
  auto ws = flatten(watched);
  if (ps.size() != ws.size() || ps.size() != states.size())
    throw std::invalid_argument("optimizer: parameter layout changed");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto it = grads.find(ws[i]->node);
    if (it == grads.end()) throw std::invalid_argument("optimizer: missing gradient for leaf");
    adam_apply(states[i], *ps[i], it->second);
  }
}

// ---------------------------------------------------------------------------
// Metric formatting
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_metric_row(const MetricTraceRow& r) {
  std::ostringstream os;
  os << r.step << ',' << format_double(r.episode_return_mean) << ',' << format_double(r.l_v)
     << ',' << format_double(r.l_vplus) << ',' << format_double(r.l_model) << ','
     << format_double(r.value_error_vm) << ',' << format_double(r.value_error_vplus) << ','
     << format_double(r.grad_norm) << ',' << format_double(r.epsilon) << ',' << r.seed << ','
     << r.env_step;
  return os.str();
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : rng_(seed) {
  if (capacity == 0) throw std::invalid_argument("replay: capacity must be positive");
  ring_.reserve(capacity);
  ring_.resize(capacity);
}

void ReplayBuffer::add(SequenceSample s) {
  ring_[head_] = std::move(s);
  head_ += 1;
  if (head_ == ring_.size()) {
    head_ = 0;
    full_ = true;
  }
}

std::vector<const SequenceSample*> ReplayBuffer::sample(std::size_t batch) {
  const std::size_t n = size();
  if (n == 0 || batch == 0) return {};
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  std::vector<const SequenceSample*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(&ring_[dist(rng_)]);
  return out;
}

std::pair<UnrollBatch, std::vector<double>> ReplayBuffer::assemble(
    const std::vector<const SequenceSample*>& seqs) {
  if (seqs.empty()) throw std::invalid_argument("replay assemble: no sequences");
  const UnrollBatch& first = seqs[0]->data;
  const std::size_t T = first.length, B = seqs.size(), O = first.obs_dim;
  const std::size_t H = seqs[0]->h0.size();
  UnrollBatch u = UnrollBatch::empty(T, B, O);
  std::vector<double> h0(B * H, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& s = *seqs[b];
    if (s.data.length != T || s.data.obs_dim != O || s.data.batch != 1 || s.h0.size() != H)
      throw std::invalid_argument("replay assemble: inconsistent sequence layout");
    for (std::size_t t = 0; t < T; ++t) {
      std::copy_n(s.data.obs[t].data(), O, u.obs[t].data() + b * O);
      u.actions[t][b] = s.data.actions[t][0];
      u.rewards[t][b] = s.data.rewards[t][0];
      u.discounts[t][b] = s.data.discounts[t][0];
      u.episode_start[t][b] = s.data.episode_start[t][0];
    }
    std::copy_n(s.h0.data(), H, h0.data() + b * H);
  }
  return {std::move(u), std::move(h0)};
}

std::vector<SequenceSample> ReplayBuffer::snapshot() const {
  std::vector<SequenceSample> out;
  const std::size_t n = size();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ring_[i]);
  return out;
}

void ReplayBuffer::restore(std::vector<SequenceSample> entries, std::size_t head, bool full) {
  if (entries.size() > ring_.size())
    throw std::invalid_argument("replay restore: more entries than capacity");
  for (std::size_t i = 0; i < entries.size(); ++i) ring_[i] = std::move(entries[i]);
  head_ = head;
  full_ = full;
}

// ---------------------------------------------------------------------------
// Actor-critic update
// ---------------------------------------------------------------------------

namespace {

Rows tensor_values_rows(const std::vector<Tensor>& v, std::size_t upto) {
  Rows rows;
  rows.reserve(upto);
  for (std::size_t t = 0; t < upto; ++t) rows.push_back(v[t].values);
  return rows;
}

double masked_mse(const Rows& a, const Rows& b, const Mask& mask) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < mask.size(); ++t)
    for (std::size_t i = 0; i < mask[t].size(); ++i)
      if (mask[t][i]) {
        const double d = a[t][i] - b[t][i];
        acc += d * d;
        count += 1;
      }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

}  // namespace

UpdateResult actor_critic_update(AcAgent& agent, const UnrollBatch& u,
                                 const std::vector<double>& h0_values) {
  const std::size_t T = u.length, B = u.batch;
  if (T < 2) throw std::invalid_argument("actor_critic_update: unroll must have >= 2 slots");
  const NetConfig& cfg = agent.params.config;
  if (cfg.head_kind != HeadKind::state_value || !cfg.with_policy)
    throw std::invalid_argument("actor_critic_update: needs a state-value net with a policy");
  const std::size_t Tr = T - 1;  // trained transitions; the last slot only bootstraps

  Tape tape;
  HimoParams watched = watch(tape, agent.params);

  UnrollOptions opt;
  opt.want_vplus = agent.weights.alpha != 0.0;
  opt.want_hindsight = agent.weights.alpha != 0.0 || agent.weights.beta != 0.0;
  opt.want_policy = true;
  ForwardOutputs fo =
      forward_unroll(watched, u, Tensor({B, cfg.core_hidden}, h0_values), agent.k, opt);

  // Targets from the value snapshot (plain doubles -> constants).
  Rows rewards(u.rewards.begin(), u.rewards.begin() + Tr);
  Rows discounts(u.discounts.begin(), u.discounts.begin() + Tr);
  Rows bootstrap = tensor_values_rows(fo.v_m, T);  // slots 0..T-1 = states 0..Tr
  Rows target = nstep_target(rewards, discounts, bootstrap, agent.target_cfg.n,
                             agent.target_cfg.gamma);

  Rows advantage(Tr, std::vector<double>(B, 0.0));
  for (std::size_t t = 0; t < Tr; ++t)
    for (std::size_t b = 0; b < B; ++b)
      advantage[t][b] = target[t][b] - bootstrap[t][b];

  const double inv_count = 1.0 / static_cast<double>(Tr * B);

  // Policy gradient term: -(1/count) sum advantage * log pi(a)
  Tensor pg_acc = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < Tr; ++t) {
    Tensor lse = logsumexp_rows(fo.policy_logits[t]);
    Tensor chosen = gather_actions(fo.policy_logits[t], u.actions[t]);
    Tensor logp = sub(chosen, lse);
    pg_acc = add(pg_acc, sum(mul(logp, Tensor({B}, advantage[t]))));
  }
  Tensor pg_loss = mul(pg_acc, Tensor::scalar(-inv_count));

  Mask train_mask(Tr, std::vector<std::uint8_t>(B, 1));
  std::vector<Tensor> v_pred(fo.v_m.begin(), fo.v_m.begin() + Tr);
  Tensor l_v = value_loss(v_pred, target, train_mask);

  Tensor l_vplus = Tensor::scalar(0.0);
  Mask vplus_mask(Tr, std::vector<std::uint8_t>(B, 0));
  if (agent.weights.alpha != 0.0) {
    for (std::size_t t = 0; t < Tr; ++t)
      for (std::size_t b = 0; b < B; ++b) vplus_mask[t][b] = fo.hindsight_valid[t][b];
    std::vector<Tensor> vp(fo.v_plus.begin(), fo.v_plus.begin() + Tr);
    l_vplus = value_loss(vp, target, vplus_mask);
  }

  Tensor l_model = Tensor::scalar(0.0);
  if (agent.weights.beta != 0.0) {
    l_model = agent.model_loss == ModelLossKind::squared
                  ? model_loss_squared(fo.phi, fo.phi_hat, fo.hindsight_valid)
                  : model_loss_xent(fo.phi, fo.phi_hat, fo.hindsight_valid);
  }

  Tensor total = add(pg_loss, combined_loss(l_v, l_vplus, l_model, agent.weights));
  if (agent.entropy_coef != 0.0) {
    Tensor ent_acc = Tensor::scalar(0.0);
    for (std::size_t t = 0; t < Tr; ++t)
      ent_acc = add(ent_acc, sum(entropy_rows(fo.policy_logits[t])));
    total = sub(total, mul(Tensor::scalar(agent.entropy_coef * inv_count), ent_acc));
  }

  GradMap grads = tape.backward(total);
  agent.opt.step(agent.params, watched, grads);
  agent.learner_steps += 1;

  UpdateResult res;
  res.row.step = agent.learner_steps;
  res.row.l_v = l_v.item();
  res.row.l_vplus = l_vplus.item();
  res.row.l_model = l_model.item();
  res.row.grad_norm = grad_norm(grads);
  res.row.value_error_vm = masked_mse(target, Rows(bootstrap.begin(), bootstrap.begin() + Tr),
                                      train_mask);
  if (agent.weights.alpha != 0.0) {
    Rows vplus_vals(Tr, std::vector<double>(B, 0.0));
    for (std::size_t t = 0; t < Tr; ++t)
      if (fo.v_plus[t].size() == B) vplus_vals[t] = fo.v_plus[t].values;
    res.row.value_error_vplus = masked_mse(target, vplus_vals, vplus_mask);
  }
  res.grads = std::move(grads);
  return res;
}

// ---------------------------------------------------------------------------
// Q-learning update
// ---------------------------------------------------------------------------

std::optional<UpdateResult> q_learning_update(QAgent& agent, ReplayBuffer& replay,
                                              double epsilon_for_trace) {
  if (!replay.ready(agent.batch_size)) return std::nullopt;
  auto seqs = replay.sample(agent.batch_size);
  auto [u, h0] = ReplayBuffer::assemble(seqs);

  const std::size_t T = u.length, B = u.batch;
  if (T < 2) throw std::invalid_argument("q_learning_update: sequences must have >= 2 slots");
  const NetConfig& cfg = agent.params.config;
  if (cfg.head_kind != HeadKind::action_value)
    throw std::invalid_argument("q_learning_update: needs an action-value net");
  const std::size_t A = cfg.n_actions;
  const std::size_t Tr = T - 1;

  Tape tape;
  HimoParams watched = watch(tape, agent.params);

  UnrollOptions opt;
  opt.want_vplus = agent.weights.alpha != 0.0;
  opt.want_hindsight = agent.weights.alpha != 0.0 || agent.weights.beta != 0.0;
  ForwardOutputs fo =
      forward_unroll(watched, u, Tensor({B, cfg.core_hidden}, h0), agent.k, opt);

  // Target-network pass, values only.
  ForwardOutputs ft = forward_unroll(agent.target_params, u,
                                     Tensor({B, cfg.core_hidden}, h0), agent.k, {});

  std::vector<std::vector<double>> q_online, q_target;
  q_online.reserve(T);
  q_target.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    q_online.push_back(fo.v_m[t].values);
    q_target.push_back(ft.v_m[t].values);
  }

  Rows rewards(u.rewards.begin(), u.rewards.begin() + Tr);
  Rows discounts(u.discounts.begin(), u.discounts.begin() + Tr);
  Rows target = q_lambda_target(rewards, discounts, q_target, q_online, A, agent.target_cfg);

  Mask train_mask(Tr, std::vector<std::uint8_t>(B, 1));
  std::vector<Tensor> q_taken;
  q_taken.reserve(Tr);
  for (std::size_t t = 0; t < Tr; ++t)
    q_taken.push_back(gather_actions(fo.v_m[t], u.actions[t]));
  Tensor l_v = value_loss(q_taken, target, train_mask);

  Tensor l_vplus = Tensor::scalar(0.0);
  Mask vplus_mask(Tr, std::vector<std::uint8_t>(B, 0));
  if (agent.weights.alpha != 0.0) {
    for (std::size_t t = 0; t < Tr; ++t)
      for (std::size_t b = 0; b < B; ++b) vplus_mask[t][b] = fo.hindsight_valid[t][b];
    std::vector<Tensor> qp;
    qp.reserve(Tr);
    for (std::size_t t = 0; t < Tr; ++t) {
      if (fo.v_plus[t].size() == B * A)
        qp.push_back(gather_actions(fo.v_plus[t], u.actions[t]));
      else
        qp.push_back(Tensor{});
    }
    l_vplus = value_loss(qp, target, vplus_mask);
  }

  Tensor l_model = Tensor::scalar(0.0);
  if (agent.weights.beta != 0.0) {
    l_model = agent.model_loss == ModelLossKind::squared
                  ? model_loss_squared(fo.phi, fo.phi_hat, fo.hindsight_valid)
                  : model_loss_xent(fo.phi, fo.phi_hat, fo.hindsight_valid);
  }

  Tensor total = combined_loss(l_v, l_vplus, l_model, agent.weights);
  GradMap grads = tape.backward(total);
  agent.opt.step(agent.params, watched, grads);
  agent.learner_steps += 1;

  if (agent.target_cfg.target_update_interval > 0 &&
      agent.learner_steps % agent.target_cfg.target_update_interval == 0) {
    agent.target_params = agent.params;
    agent.last_target_sync = agent.learner_steps;
  }

  UpdateResult res;
  res.row.step = agent.learner_steps;
  res.row.l_v = l_v.item();
  res.row.l_vplus = l_vplus.item();
  res.row.l_model = l_model.item();
  res.row.grad_norm = grad_norm(grads);
  res.row.epsilon = epsilon_for_trace;
  {
    Rows taken_vals;
    taken_vals.reserve(Tr);
    for (std::size_t t = 0; t < Tr; ++t) taken_vals.push_back(q_taken[t].values);
    res.row.value_error_vm = masked_mse(target, taken_vals, train_mask);
  }
  res.grads = std::move(grads);
  return res;
}

double epsilon_schedule(double start, double end, long anneal_steps, long env_step) {
  if (anneal_steps <= 0 || env_step >= anneal_steps) return end;
  if (env_step <= 0) return start;
  const double f = static_cast<double>(env_step) / static_cast<double>(anneal_steps);
  return start + (end - start) * f;
}

}  // namespace himo
