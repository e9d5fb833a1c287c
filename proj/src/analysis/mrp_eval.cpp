#include "himo/analysis/mrp_eval.hpp"

#include <stdexcept>

#include "himo/rng.hpp"

namespace himo {

namespace {

Partition watch_partition(Tape& tape, const Partition& p) {
  Partition out;
  out.reserve(p.size());
  for (const Tensor& t : p) out.push_back(tape.leaf(t));
  return out;
}

struct Batch {
  Tensor s;        // [B, D]
  Tensor s_prime;  // [B, D]
  Rows reward;     // [1][B] for value_loss
  Mask all;        // [1][B] ones
};

Batch pack(const std::vector<MrpEpisode>& eps, std::size_t D) {
  const std::size_t B = eps.size();
  std::vector<double> s(B * D), sp(B * D);
  std::vector<double> r(B);
  for (std::size_t i = 0; i < B; ++i) {
    if (eps[i].s.size() != D || eps[i].s_prime.size() != D)
      throw std::invalid_argument("mrp batch: wrong episode dimension");
    std::copy(eps[i].s.begin(), eps[i].s.end(), s.begin() + i * D);
    std::copy(eps[i].s_prime.begin(), eps[i].s_prime.end(), sp.begin() + i * D);
    r[i] = eps[i].reward;
  }
  Batch b;
  b.s = Tensor({B, D}, std::move(s));
  b.s_prime = Tensor({B, D}, std::move(sp));
  b.reward = {std::move(r)};
  b.all = Mask(1, std::vector<std::uint8_t>(B, 1));
  return b;
}

Tensor value_col_to_row(const Tensor& v) {  // [B,1] -> [B]
  return reshape(v, {v.shape[0]});
}

}  // namespace

std::vector<Tensor*> mrp_flatten(MrpLearner& l) {
  std::vector<Tensor*> out;
  for (Partition* part :
       {&l.direct, &l.eta2, &l.eta1, &l.theta2, &l.theta1, &l.mb_model, &l.mb_value})
    for (Tensor& t : *part) out.push_back(&t);
  return out;
}

MrpLearner init_mrp_learner(const MrpLearnerConfig& config, std::uint64_t seed) {
  MrpLearner l;
  l.config = config;
  std::mt19937_64 rng(seed);
  const std::size_t D = config.D, H = config.hidden, d = config.phi_dim;
  l.direct = make_mlp(rng, D, H, 1);
  l.eta2 = make_mlp(rng, D, H, d);
  l.eta1 = make_mlp(rng, D + d, H, 1);
  l.theta2 = make_mlp(rng, D, H, d);
  l.theta1 = make_mlp(rng, D + d, H, 1);
  l.mb_model = make_mlp(rng, D, H, D);
  l.mb_value = make_mlp(rng, 2 * D, H, 1);
  AdamConfig adam;
  adam.lr = config.lr;
  for (const Tensor* t : mrp_flatten(l)) l.opt.emplace_back(t->shape, adam);
  return l;
}

MrpLossRow mrp_train_step(MrpLearner& learner, const std::vector<MrpEpisode>& batch) {
  if (batch.empty()) throw std::invalid_argument("mrp_train_step: empty batch");
  const Batch b = pack(batch, learner.config.D);
  const std::size_t B = batch.size();

  Tape tape;
  Partition direct = watch_partition(tape, learner.direct);
  Partition eta2 = watch_partition(tape, learner.eta2);
  Partition eta1 = watch_partition(tape, learner.eta1);
  Partition theta2 = watch_partition(tape, learner.theta2);
  Partition theta1 = watch_partition(tape, learner.theta1);
  Partition mb_model = watch_partition(tape, learner.mb_model);
  Partition mb_value = watch_partition(tape, learner.mb_value);

  // direct regression
  Tensor v_direct = value_col_to_row(mlp_forward(direct, b.s));
  Tensor l_direct = value_loss({v_direct}, b.reward, b.all);

  // hindsight bundle (same stop-gradient topology as the recurrent agent)
  Tensor phi = mlp_forward(theta2, b.s_prime);
  Tensor v_plus = value_col_to_row(mlp_forward(theta1, concat(b.s, phi)));
  Tensor phi_hat = mlp_forward(eta2, b.s);
  Tensor v_m = value_col_to_row(mlp_forward(eta1, concat(b.s, stop_gradient(phi_hat))));
  Tensor l_vm = value_loss({v_m}, b.reward, b.all);
  Tensor l_vplus = value_loss({v_plus}, b.reward, b.all);
  Tensor l_model = model_loss_squared({phi}, {phi_hat}, b.all);

  // model-based bundle: reconstruction plus value from the stopped prediction
  Tensor s_hat = mlp_forward(mb_model, b.s);
  Tensor v_mb = value_col_to_row(mlp_forward(mb_value, concat(b.s, stop_gradient(s_hat))));
  Tensor l_mb_value = value_loss({v_mb}, b.reward, b.all);
  Tensor recon = square(sub(s_hat, b.s_prime));
  Tensor l_mb_recon = mul(sum(recon), Tensor::scalar(0.5 / static_cast<double>(B * learner.config.D)));

  Tensor total = add(l_direct, combined_loss(l_vm, l_vplus, l_model,
                                             {learner.config.alpha, learner.config.beta}));
  total = add(total, add(l_mb_value, l_mb_recon));

  GradMap grads = tape.backward(total);

  auto params = mrp_flatten(learner);
  MrpLearner watched;  // only for flatten alignment of the tracked copies
  watched.direct = direct;
  watched.eta2 = eta2;
  watched.eta1 = eta1;
  watched.theta2 = theta2;
  watched.theta1 = theta1;
  watched.mb_model = mb_model;
  watched.mb_value = mb_value;
  auto tracked = mrp_flatten(watched);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto it = grads.find(tracked[i]->node);
    if (it == grads.end()) throw std::logic_error("mrp_train_step: missing leaf gradient");
    adam_apply(learner.opt[i], *params[i], it->second);
  }

  MrpLossRow row;
  row.l_direct = l_direct.item();
  row.l_vm = l_vm.item();
  row.l_vplus = l_vplus.item();
  row.l_model = l_model.item();
  row.l_mb_value = l_mb_value.item();
  row.l_mb_recon = l_mb_recon.item();
  return row;
}

MrpErrors mrp_value_errors(const MrpLearner& learner, const MrpInstance& instance,
                           std::size_t n_states, std::mt19937_64& rng) {
  if (instance.dim() != learner.config.D)
    throw std::invalid_argument("mrp_value_errors: instance/learner dimension mismatch");
  std::vector<MrpEpisode> eps;
  eps.reserve(n_states);
  for (std::size_t i = 0; i < n_states; ++i) eps.push_back(instance.sample(rng));
  const Batch b = pack(eps, learner.config.D);

  // plain forward passes (no tape)
  Tensor v_direct = value_col_to_row(mlp_forward(learner.direct, b.s));
  Tensor phi = mlp_forward(learner.theta2, b.s_prime);
  Tensor v_plus = value_col_to_row(mlp_forward(learner.theta1, concat(b.s, phi)));
  Tensor phi_hat = mlp_forward(learner.eta2, b.s);
  Tensor v_m = value_col_to_row(mlp_forward(learner.eta1, concat(b.s, phi_hat)));
  Tensor s_hat = mlp_forward(learner.mb_model, b.s);
  Tensor v_mb = value_col_to_row(mlp_forward(learner.mb_value, concat(b.s, s_hat)));

  MrpErrors err;
  const double inv = 1.0 / static_cast<double>(n_states);
  for (std::size_t i = 0; i < n_states; ++i) {
    const double truth = b.reward[0][i];
    const double d0 = v_direct.values[i] - truth;
    const double d1 = v_m.values[i] - truth;
    const double d2 = v_plus.values[i] - truth;
    const double d3 = v_mb.values[i] - truth;
    err.v_direct += d0 * d0 * inv;
    err.v_m += d1 * d1 * inv;
    err.v_plus += d2 * d2 * inv;
    err.model_based += d3 * d3 * inv;
  }
  return err;
}

}  // namespace himo
