// With both auxiliary loss weights at zero, the full agent must be
// indistinguishable from a standard recurrent agent — not approximately, but
// bitwise, update after update. These tests train the zero-weight agent next
// to the independently coded reference agents from plain_agents.hpp on
// identical data and compare every parameter tensor after every step.

#include <random>
#include <string>
#include <vector>

#include "doctest.h"

#include "himo/learning.hpp"
#include "himo/nets.hpp"
#include "himo/rng.hpp"
#include "plain_agents.hpp"

using namespace himo;
using plainref::compare_partitions;

namespace {

NetConfig ac_net_config() {
  NetConfig cfg;
  cfg.obs_dim = 5;
  cfg.core_hidden = 8;
  cfg.d = 3;
  cfg.phi_hidden = 6;
  cfg.phi_hat_hidden = 6;
  cfg.head_hidden = 7;
  cfg.n_actions = 4;
  cfg.head_kind = HeadKind::state_value;
  cfg.with_policy = true;
  return cfg;
}

NetConfig q_net_config() {
  NetConfig cfg = ac_net_config();
  cfg.head_kind = HeadKind::action_value;
  cfg.with_policy = false;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("baseline equivalence");

TEST_CASE("zero-weight agent is bitwise a plain recurrent actor-critic") {
  const NetConfig cfg = ac_net_config();
  const double lr = 1e-3;

  AcAgent agent;
  agent.params = init_params(cfg, 2024);
  agent.opt.config.lr = lr;
  agent.opt.init(agent.params);
  agent.weights = {0.0, 0.0};
  agent.target_cfg.n = 3;
  agent.target_cfg.gamma = 0.99;
  agent.entropy_coef = 0.01;
  agent.k = 2;

  const HimoParams at_init = agent.params;
  plainref::PlainAc mine = plainref::plain_ac_from(agent.params, lr, 3, 0.99, 0.01);

  std::mt19937_64 rng(555);
  for (int step = 1; step <= 10; ++step) {
    CAPTURE(step);
    const UnrollBatch u = plainref::synthetic_unroll(rng, 6, 3, cfg.obs_dim, cfg.n_actions);
    const std::vector<double> h0 = plainref::synthetic_state(rng, 3 * cfg.core_hidden);

    const UpdateResult res = actor_critic_update(agent, u, h0);
    const plainref::PlainAcDiagnostics ref = plain_ac_update(mine, u, h0);

    CHECK(res.row.l_v == ref.value_loss);  // the very doubles, not approx

    CHECK(compare_partitions("state core", agent.params.eta3, mine.cell) == "");
    CHECK(compare_partitions("value head", agent.params.eta1, mine.head) == "");
    CHECK(compare_partitions("policy", agent.params.pi, mine.pol) == "");

    // The hindsight machinery must not have moved at all.
    CHECK(compare_partitions("feature model", agent.params.eta2, at_init.eta2) == "");
    CHECK(compare_partitions("hindsight features", agent.params.theta2, at_init.theta2) == "");
    CHECK(compare_partitions("hindsight value", agent.params.theta1, at_init.theta1) == "");
  }

  // The comparison is not vacuous: training moved the shared partitions...
  CHECK(compare_partitions("state core", agent.params.eta3, at_init.eta3) != "");
  CHECK(compare_partitions("policy", agent.params.pi, at_init.pi) != "");

  // ...and one extra update on one side alone breaks the match.
  const UnrollBatch u = plainref::synthetic_unroll(rng, 6, 3, cfg.obs_dim, cfg.n_actions);
  const std::vector<double> h0 = plainref::synthetic_state(rng, 3 * cfg.core_hidden);
  actor_critic_update(agent, u, h0);
  CHECK(compare_partitions("state core", agent.params.eta3, mine.cell) != "");
}

TEST_CASE("nonzero auxiliary weights break the plain-agent match") {
  const NetConfig cfg = ac_net_config();

  AcAgent agent;
  agent.params = init_params(cfg, 2024);
  agent.opt.config.lr = 1e-3;
  agent.opt.init(agent.params);
  agent.weights = {0.25, 0.5};  // auxiliary losses on
  agent.target_cfg.n = 3;
  agent.target_cfg.gamma = 0.99;
  agent.entropy_coef = 0.01;
  agent.k = 2;

  const HimoParams at_init = agent.params;
  plainref::PlainAc mine = plainref::plain_ac_from(agent.params, 1e-3, 3, 0.99, 0.01);

  std::mt19937_64 rng(555);
  for (int step = 0; step < 3; ++step) {
    const UnrollBatch u = plainref::synthetic_unroll(rng, 6, 3, cfg.obs_dim, cfg.n_actions);
    const std::vector<double> h0 = plainref::synthetic_state(rng, 3 * cfg.core_hidden);
    actor_critic_update(agent, u, h0);
    plain_ac_update(mine, u, h0);
  }

  // The feature-model loss reaches the state core, so even the shared
  // partitions drift away from the plain agent...
  CHECK(compare_partitions("state core", agent.params.eta3, mine.cell) != "");
  // ...and the hindsight partitions now train instead of staying frozen.
  CHECK(compare_partitions("feature model", agent.params.eta2, at_init.eta2) != "");
  CHECK(compare_partitions("hindsight features", agent.params.theta2, at_init.theta2) != "");
  CHECK(compare_partitions("hindsight value", agent.params.theta1, at_init.theta1) != "");
}

TEST_CASE("zero-weight agent is bitwise a plain recurrent double-Q learner") {
  const NetConfig cfg = q_net_config();
  const double lr = 1e-3;

  TargetConfig tcfg;
  tcfg.n = 3;
  tcfg.gamma = 0.99;
  tcfg.lambda = 0.7;
  tcfg.use_rescale = true;  // exercise the squashed-target path as well
  tcfg.rescale_epsilon = 1e-3;
  tcfg.target_update_interval = 4;

  QAgent agent;
  agent.params = init_params(cfg, 77);
  agent.target_params = agent.params;
  agent.opt.config.lr = lr;
  agent.opt.init(agent.params);
  agent.weights = {0.0, 0.0};
  agent.target_cfg = tcfg;
  agent.k = 2;
  agent.batch_size = 4;

  const HimoParams at_init = agent.params;
  plainref::PlainQ mine = plainref::plain_q_from(agent.params, lr, tcfg, 4);

  // Two buffers with identical contents and identical sampling streams.
  ReplayBuffer replay_lib(10, 99);
  ReplayBuffer replay_ref(10, 99);
  std::mt19937_64 rng(31);
  for (int i = 0; i < 12; ++i) {
    const SequenceSample s =
        plainref::synthetic_sequence(rng, 6, cfg.obs_dim, cfg.n_actions, cfg.core_hidden);
    replay_lib.add(s);
    replay_ref.add(s);
  }

  for (int step = 1; step <= 10; ++step) {
    CAPTURE(step);
    const auto res = q_learning_update(agent, replay_lib, 0.1);
    REQUIRE(res.has_value());
    const plainref::PlainQDiagnostics ref = plain_q_update(mine, replay_ref);
    REQUIRE(ref.updated);

    CHECK(res->row.l_v == ref.value_loss);

    CHECK(compare_partitions("state core", agent.params.eta3, mine.cell) == "");
    CHECK(compare_partitions("q head", agent.params.eta1, mine.head) == "");
    CHECK(compare_partitions("target core", agent.target_params.eta3, mine.t_cell) == "");
    CHECK(compare_partitions("target head", agent.target_params.eta1, mine.t_head) == "");

    CHECK(compare_partitions("feature model", agent.params.eta2, at_init.eta2) == "");
    CHECK(compare_partitions("hindsight features", agent.params.theta2, at_init.theta2) == "");
    CHECK(compare_partitions("hindsight value", agent.params.theta1, at_init.theta1) == "");
  }

  // Ten steps crossed two target syncs: the target copy moved off its init.
  CHECK(compare_partitions("target core", agent.target_params.eta3, at_init.eta3) != "");
  CHECK(compare_partitions("state core", agent.params.eta3, at_init.eta3) != "");

  // One extra update on one side alone breaks the match.
  q_learning_update(agent, replay_lib, 0.1);
  CHECK(compare_partitions("state core", agent.params.eta3, mine.cell) != "");
}

TEST_SUITE_END();
