#include <cmath>
#include <deque>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "himo/analysis/probe.hpp"
#include "himo/envs/portal.hpp"
#include "himo/harness/checkpoint.hpp"
#include "himo/learning.hpp"
#include "himo/nets.hpp"
#include "himo/rng.hpp"
#include "himo/version.hpp"

#include "runners.hpp"

namespace himo::harness {

namespace {

namespace fs = std::filesystem;

constexpr std::size_t kReturnWindow = 100;  // trailing completed episodes

int greedy_with_epsilon(const double* q, std::size_t n, double eps, std::mt19937_64& rng) {
  const double u = sample_uniform(rng);
  if (u < eps) return static_cast<int>(sample_index(rng, n));
  std::size_t best = 0;
  for (std::size_t a = 1; a < n; ++a)
    if (q[a] > q[best]) best = a;
  return static_cast<int>(best);
}

// Interaction state between updates: the parallel envs, the window being
// filled, the carried recurrent state, and return bookkeeping. The carry
// fields implement the overlap-by-one scheme: slot T-1 of one window is
// slot 0 of the next, and carry_h (the state after slot T-2) becomes its h0.
struct Collector {
  std::vector<PortalEnv> envs;
  std::mt19937_64 action_rng;
  UnrollBatch window;
  std::vector<double> h0;
  std::vector<double> carry_obs;
  std::vector<std::uint8_t> carry_start;
  std::vector<double> carry_h;
  bool have_carry = false;
  long env_steps = 0;
  std::deque<double> returns;
  std::vector<double> ret_acc;
};

// Fills all T slots of the window (acting on slots 0..T-2; slot T-1 only
// receives its observation) and advances the carry.
void collect_window(Collector& c, const HimoParams& params, double eps) {
  const std::size_t B = c.window.batch;
  const std::size_t T = c.window.length;
  const std::size_t H = params.config.core_hidden;
  const std::size_t A = params.config.n_actions;
  const std::size_t od = c.window.obs_dim;

  if (!c.have_carry) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::vector<double> obs = c.envs[b].reset();
      std::copy(obs.begin(), obs.end(),
                c.window.obs[0].begin() + static_cast<long>(b * od));
      c.window.episode_start[0][b] = 1;
    }
    c.h0.assign(B * H, 0.0);
  } else {
    c.window.obs[0] = c.carry_obs;
    c.window.episode_start[0] = c.carry_start;
    c.h0 = c.carry_h;
  }

  Tensor h({B, H}, c.h0);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    Tensor obs_t({B, od}, c.window.obs[t]);
    std::vector<double> keep(B);
    for (std::size_t b = 0; b < B; ++b)
      keep[b] = c.window.episode_start[t][b] ? 0.0 : 1.0;
    h = state_step_masked(params.eta3, h, obs_t, Tensor({B, 1}, std::move(keep)));
    const Tensor phi_hat = phi_hat_forward(params.eta2, h);
    const Tensor trunk = head_trunk(params.eta1, h, phi_hat);
    const Tensor out = params.config.with_policy
                           ? policy_logits_from_trunk(params.pi, trunk)
                           : value_from_trunk(params.eta1, trunk, HeadKind::action_value);

    for (std::size_t b = 0; b < B; ++b) {
      const double* row = out.values.data() + b * A;
      const int a = params.config.with_policy
                        ? sample_categorical(row, A, c.action_rng)
                        : greedy_with_epsilon(row, A, eps, c.action_rng);
      PortalStepResult res = c.envs[b].step(a);
      c.window.actions[t][b] = a;
      c.window.rewards[t][b] = res.reward;
      c.window.discounts[t][b] = res.done ? 0.0 : 1.0;
      c.ret_acc[b] += res.reward;
      std::vector<double> next_obs;
      if (res.done) {
        c.returns.push_back(c.ret_acc[b]);
        if (c.returns.size() > kReturnWindow) c.returns.pop_front();
        c.ret_acc[b] = 0.0;
        next_obs = c.envs[b].reset();
        c.window.episode_start[t + 1][b] = 1;
      } else {
        next_obs = std::move(res.obs);
        c.window.episode_start[t + 1][b] = 0;
      }
      std::copy(next_obs.begin(), next_obs.end(),
                c.window.obs[t + 1].begin() + static_cast<long>(b * od));
    }
  }

  c.env_steps += static_cast<long>((T - 1) * B);
  c.carry_obs = c.window.obs[T - 1];
  c.carry_start = c.window.episode_start[T - 1];
  c.carry_h = h.values;
  c.have_carry = true;
}

double trailing_return_mean(const Collector& c) {
  if (c.returns.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const double r : c.returns) sum += r;
  return sum / static_cast<double>(c.returns.size());
}

nlohmann::json collector_to_json(const Collector& c) {
  nlohmann::json j;
  j["action_rng"] = rng_to_string(c.action_rng);
  j["have_carry"] = c.have_carry;
  j["carry_obs"] = doubles_to_base64(c.carry_obs);
  j["carry_start"] = std::vector<int>(c.carry_start.begin(), c.carry_start.end());
  j["carry_h"] = doubles_to_base64(c.carry_h);
  j["env_steps"] = c.env_steps;
  j["returns"] = doubles_to_base64(std::vector<double>(c.returns.begin(), c.returns.end()));
  j["ret_acc"] = doubles_to_base64(c.ret_acc);
  nlohmann::json envs = nlohmann::json::array();
  for (const PortalEnv& e : c.envs) envs.push_back(portal_snapshot_to_json(e.snapshot()));
  j["envs"] = envs;
  return j;
}

void collector_from_json(const nlohmann::json& j, Collector& c) {
  c.action_rng = rng_from_string(j.at("action_rng").get<std::string>());
  c.have_carry = j.at("have_carry").get<bool>();
  c.carry_obs = doubles_from_base64(j.at("carry_obs").get<std::string>());
  const auto start = j.at("carry_start").get<std::vector<int>>();
  c.carry_start.assign(start.begin(), start.end());
  c.carry_h = doubles_from_base64(j.at("carry_h").get<std::string>());
  c.env_steps = j.at("env_steps").get<long>();
  const auto rets = doubles_from_base64(j.at("returns").get<std::string>());
  c.returns.assign(rets.begin(), rets.end());
  c.ret_acc = doubles_from_base64(j.at("ret_acc").get<std::string>());
  const nlohmann::json& envs = j.at("envs");
  if (envs.size() != c.envs.size())
    throw std::invalid_argument("checkpoint: env count mismatch");
  for (std::size_t b = 0; b < c.envs.size(); ++b)
    c.envs[b].restore(portal_snapshot_from_json(envs[b]));
}

// --- probe dumps -----------------------------------------------------------
//
// Feature dumps for the room classification probe. One sample per episode,
// taken at t* = the last selection-room step whose hindsight window lands in
// the goal room: phi reads the state k steps after t* (it has seen the room)
// while phi_hat reads the state at t* (it must predict it). Episodes that
// never reach the goal room inside the window are skipped. The dump runs on
// its own envs and rng streams, so training is untouched.

void probe_dump(const HimoParams& params, const PortalLayout& layout,
                const ExperimentConfig& cfg, std::uint64_t seed, long step, long env_steps,
                OutFile& out) {
  const std::uint64_t base = derive_seed(seed, seed_tag::probe, static_cast<std::uint64_t>(step));
  PortalEnv env(layout, derive_seed(base, seed_tag::env, 0), cfg.time_limit);
  std::mt19937_64 act_rng(derive_seed(base, seed_tag::actions, 0));
  const std::size_t H = cfg.net.core_hidden;
  const std::size_t A = cfg.net.n_actions;
  const std::size_t od = cfg.net.obs_dim;
  const std::size_t k = cfg.k;

  std::vector<std::vector<double>> phi_rows, phi_hat_rows;
  std::vector<int> labels;

  for (std::size_t ep = 0;
       ep < cfg.probe_max_episodes && labels.size() < cfg.probe_target_samples; ++ep) {
    std::vector<double> obs = env.reset();
    Tensor h({1, H}, std::vector<double>(H, 0.0));
    std::vector<std::vector<double>> hs;
    std::vector<int> phases;
    int label = -1;
    bool done = false;
    while (!done) {
      phases.push_back(env.phase() == PortalPhase::selection_room ? 1 : 2);
      h = state_step_masked(params.eta3, h, Tensor({1, od}, obs), Tensor({1, 1}, {1.0}));
      hs.push_back(h.values);
      const Tensor phi_hat = phi_hat_forward(params.eta2, h);
      const Tensor trunk = head_trunk(params.eta1, h, phi_hat);
      int a;
      if (cfg.net.with_policy) {
        const Tensor logits = policy_logits_from_trunk(params.pi, trunk);
        a = sample_categorical(logits.values.data(), A, act_rng);
      } else {
        const Tensor q = value_from_trunk(params.eta1, trunk, HeadKind::action_value);
        a = greedy_with_epsilon(q.values.data(), A, cfg.epsilon_end, act_rng);
      }
      PortalStepResult res = env.step(a);
      done = res.done;
      obs = std::move(res.obs);
      if (label < 0 && env.phase() == PortalPhase::goal_room)
        label = env.room_color() == RoomColor::green ? 1 : 0;
    }
    long t_star = -1;
    for (long t = static_cast<long>(hs.size()) - 1 - static_cast<long>(k); t >= 0; --t) {
      if (phases[static_cast<std::size_t>(t)] == 1 &&
          phases[static_cast<std::size_t>(t) + k] == 2) {
        t_star = t;
        break;
      }
    }
    if (t_star < 0 || label < 0) continue;
    const Tensor h_now({1, H}, hs[static_cast<std::size_t>(t_star)]);
    const Tensor h_future({1, H}, hs[static_cast<std::size_t>(t_star) + k]);
    phi_rows.push_back(phi_forward(params.theta2, h_future).values);
    phi_hat_rows.push_back(phi_hat_forward(params.eta2, h_now).values);
    labels.push_back(label);
  }

  const auto emit = [&](const char* feature, const std::vector<std::vector<double>>& rows) {
    ProbeReport rep;
    if (labels.size() >= 200) {
      rep = probe_fit(rows, labels, derive_seed(base, seed_tag::probe, 1));
    } else {
      // Too few goal-room episodes to fit: record chance level, flagged.
      rep.degenerate = true;
      rep.test_xent = rep.train_xent = std::log(2.0);
      rep.n_train = labels.size();
      rep.n_test = 0;
    }
    out.line(std::to_string(step) + "," + feature + "," + format_double(rep.test_xent) + "," +
             format_double(rep.train_xent) + "," + std::to_string(rep.n_train) + "," +
             std::to_string(rep.n_test) + "," + (rep.degenerate ? "1" : "0") + "," +
             std::to_string(env_steps) + "," + std::to_string(seed));
  };
  emit("phi", phi_rows);
  emit("phi_hat", phi_hat_rows);
  out.flush();
}

// --- shared run scaffolding --------------------------------------------------

struct RunFiles {
  fs::path dir;
  OutFile metrics;
  OutFile probe;
  bool want_probe = false;
  long metric_rows = 0;
};

void check_resume_doc(const nlohmann::json& doc, const ExperimentConfig& cfg,
                      const std::string& kind, const std::string& arm, std::uint64_t seed) {
  if (doc.at("kind").get<std::string>() != kind ||
      doc.at("arm").get<std::string>() != arm || doc.at("seed").get<std::uint64_t>() != seed)
    throw std::invalid_argument("resume: checkpoint belongs to a different run (" +
                                doc.at("kind").get<std::string>() + "/" +
                                doc.at("arm").get<std::string>() + " seed " +
                                std::to_string(doc.at("seed").get<std::uint64_t>()) + ")");
  if (doc.at("config_hash").get<std::string>() != config_hash(cfg))
    throw std::invalid_argument(
        "resume: config hash mismatch; the checkpoint was written under different settings");
}

MetricTraceRow contextual_row(const UpdateResult& res, long step, std::uint64_t seed,
                              const Collector& col, double eps) {
  MetricTraceRow row = res.row;
  row.step = step;
  row.episode_return_mean = trailing_return_mean(col);
  row.epsilon = eps;
  row.seed = seed;
  row.env_step = col.env_steps;
  return row;
}

// --- actor-critic run --------------------------------------------------------

void run_portal_ac_single(const ExperimentConfig& cfg, const std::string& arm,
                          std::uint64_t seed, const fs::path& dir,
                          const std::string& resume_path) {
  const PortalLayout layout = PortalLayout::builtin();
  if (cfg.net.obs_dim != static_cast<std::size_t>(layout.rows * layout.cols * 3))
    throw std::invalid_argument("obs_dim does not match the portal frame size");

  AcAgent agent;
  agent.params = init_params(cfg.net, derive_seed(seed, seed_tag::params, 0));
  agent.opt.config.lr = cfg.lr;
  agent.opt.init(agent.params);
  agent.weights = cfg.weights;
  agent.target_cfg = cfg.target;
  agent.entropy_coef = cfg.entropy_coef;
  agent.model_loss = cfg.model_loss;
  agent.k = cfg.k;

  Collector col;
  col.window = UnrollBatch::empty(cfg.unroll, cfg.batch, cfg.net.obs_dim);
  col.ret_acc.assign(cfg.batch, 0.0);
  col.envs.reserve(cfg.batch);
  for (std::size_t b = 0; b < cfg.batch; ++b)
    col.envs.emplace_back(layout, derive_seed(seed, seed_tag::env, b), cfg.time_limit);
  col.action_rng = std::mt19937_64(derive_seed(seed, seed_tag::actions, 0));

  RunFiles files;
  files.dir = dir;
  files.want_probe = cfg.probe_interval > 0;
  const std::string comment = csv_comment(cfg);

  const auto save = [&] {
    nlohmann::json doc;
    doc["kind"] = "portal_ac";
    doc["arm"] = arm;
    doc["seed"] = seed;
    doc["config_hash"] = config_hash(cfg);
    doc["version"] = kVersion;
    doc["learner_steps"] = agent.learner_steps;
    doc["metric_rows"] = files.metric_rows;
    doc["metrics_bytes"] = files.metrics.offset();
    doc["probe_bytes"] = files.want_probe ? files.probe.offset() : 0;
    doc["params"] = params_to_json(agent.params);
    doc["opt"] = optimizer_to_json(agent.opt);
    doc["collector"] = collector_to_json(col);
    save_checkpoint_file((dir / "checkpoint.json").string(), doc);
  };

  if (resume_path.empty()) {
    files.metrics = OutFile::fresh(dir / "metrics.csv", comment + kMetricCsvHeader + "\n");
    if (files.want_probe)
      files.probe = OutFile::fresh(dir / "probe.csv", comment + kProbeCsvHeader + "\n");
  } else {
    const nlohmann::json doc = load_checkpoint_file(resume_path);
    check_resume_doc(doc, cfg, "portal_ac", arm, seed);
    agent.params = params_from_json(doc.at("params"));
    optimizer_from_json(doc.at("opt"), agent.opt);
    agent.learner_steps = doc.at("learner_steps").get<long>();
    files.metric_rows = doc.at("metric_rows").get<long>();
    collector_from_json(doc.at("collector"), col);
    files.metrics =
        OutFile::resume_at(dir / "metrics.csv", doc.at("metrics_bytes").get<std::uint64_t>());
    if (files.want_probe)
      files.probe =
          OutFile::resume_at(dir / "probe.csv", doc.at("probe_bytes").get<std::uint64_t>());
  }

  while (agent.learner_steps < cfg.total_steps) {
    collect_window(col, agent.params, 0.0);
    const UpdateResult res = actor_critic_update(agent, col.window, col.h0);
    // Probe rows precede any checkpoint for the same step: the checkpoint
    // records CSV byte offsets, so every file written during the step must be
    // complete before the offsets are captured.
    if (files.want_probe && agent.learner_steps % cfg.probe_interval == 0)
      probe_dump(agent.params, layout, cfg, seed, agent.learner_steps, col.env_steps,
                 files.probe);
    if (cfg.eval_interval > 0 && agent.learner_steps % cfg.eval_interval == 0) {
      files.metrics.line(
          format_metric_row(contextual_row(res, agent.learner_steps, seed, col, 0.0)));
      files.metrics.flush();
      ++files.metric_rows;
      if (cfg.checkpoint_interval > 0 && files.metric_rows % cfg.checkpoint_interval == 0)
        save();
    }
  }
  save();
}

// --- q-learning run ----------------------------------------------------------

void run_portal_q_single(const ExperimentConfig& cfg, const std::string& arm,
                         std::uint64_t seed, const fs::path& dir,
                         const std::string& resume_path) {
  const PortalLayout layout = PortalLayout::builtin();
  if (cfg.net.obs_dim != static_cast<std::size_t>(layout.rows * layout.cols * 3))
    throw std::invalid_argument("obs_dim does not match the portal frame size");

  QAgent agent;
  agent.params = init_params(cfg.net, derive_seed(seed, seed_tag::params, 0));
  agent.target_params = agent.params;
  agent.opt.config.lr = cfg.lr;
  agent.opt.init(agent.params);
  agent.weights = cfg.weights;
  agent.target_cfg = cfg.target;
  agent.model_loss = cfg.model_loss;
  agent.k = cfg.k;
  agent.batch_size = cfg.batch;

  ReplayBuffer replay(cfg.replay_capacity, derive_seed(seed, seed_tag::replay, 0));

  Collector col;
  col.window = UnrollBatch::empty(cfg.unroll, 1, cfg.net.obs_dim);
  col.ret_acc.assign(1, 0.0);
  col.envs.emplace_back(layout, derive_seed(seed, seed_tag::env, 0), cfg.time_limit);
  col.action_rng = std::mt19937_64(derive_seed(seed, seed_tag::actions, 0));

  RunFiles files;
  files.dir = dir;
  const std::string comment = csv_comment(cfg);

  const auto save = [&] {
    nlohmann::json doc;
    doc["kind"] = "portal_q";
    doc["arm"] = arm;
    doc["seed"] = seed;
    doc["config_hash"] = config_hash(cfg);
    doc["version"] = kVersion;
    doc["learner_steps"] = agent.learner_steps;
    doc["last_target_sync"] = agent.last_target_sync;
    doc["metric_rows"] = files.metric_rows;
    doc["metrics_bytes"] = files.metrics.offset();
    doc["params"] = params_to_json(agent.params);
    doc["target_params"] = params_to_json(agent.target_params);
    doc["opt"] = optimizer_to_json(agent.opt);
    doc["replay"] = replay_to_json(replay);
    doc["collector"] = collector_to_json(col);
    save_checkpoint_file((dir / "checkpoint.json").string(), doc);
  };

  if (resume_path.empty()) {
    files.metrics = OutFile::fresh(dir / "metrics.csv", comment + kMetricCsvHeader + "\n");
  } else {
    const nlohmann::json doc = load_checkpoint_file(resume_path);
    check_resume_doc(doc, cfg, "portal_q", arm, seed);
    agent.params = params_from_json(doc.at("params"));
    agent.target_params = params_from_json(doc.at("target_params"));
    optimizer_from_json(doc.at("opt"), agent.opt);
    agent.learner_steps = doc.at("learner_steps").get<long>();
    agent.last_target_sync = doc.at("last_target_sync").get<long>();
    files.metric_rows = doc.at("metric_rows").get<long>();
    replay_from_json(doc.at("replay"), replay);
    collector_from_json(doc.at("collector"), col);
    files.metrics =
        OutFile::resume_at(dir / "metrics.csv", doc.at("metrics_bytes").get<std::uint64_t>());
  }

  while (agent.learner_steps < cfg.total_steps) {
    const double eps = epsilon_schedule(cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_anneal,
                                        col.env_steps);
    collect_window(col, agent.params, eps);
    SequenceSample sample;
    sample.data = col.window;
    sample.h0 = col.h0;
    replay.add(std::move(sample));
    if (replay.size() < cfg.replay_min) continue;
    const std::optional<UpdateResult> res = q_learning_update(agent, replay, eps);
    if (!res) continue;
    if (cfg.eval_interval > 0 && agent.learner_steps % cfg.eval_interval == 0) {
      files.metrics.line(
          format_metric_row(contextual_row(*res, agent.learner_steps, seed, col, eps)));
      files.metrics.flush();
      ++files.metric_rows;
      if (cfg.checkpoint_interval > 0 && files.metric_rows % cfg.checkpoint_interval == 0)
        save();
    }
  }
  save();
}

}  // namespace

std::vector<RunTask> portal_tasks(const ExperimentConfig& cfg, const RunOptions& opt) {
  const bool actor_critic = cfg.experiment == "portal_ac";

  struct Arm {
    std::string name;
    LossWeights weights;
  };
  const std::vector<Arm> arms = {{"himo", cfg.weights}, {"baseline", {0.0, 0.0}}};

  // An explicit checkpoint path narrows the task list to that single run.
  std::string only_arm;
  std::uint64_t only_seed = 0;
  const bool narrowed = !opt.resume.empty() && opt.resume != "auto";
  if (narrowed) {
    const nlohmann::json doc = load_checkpoint_file(opt.resume);
    only_arm = doc.at("arm").get<std::string>();
    only_seed = doc.at("seed").get<std::uint64_t>();
  }

  std::vector<RunTask> tasks;
  for (const Arm& arm : arms) {
    ExperimentConfig arm_cfg = cfg;
    arm_cfg.weights = arm.weights;
    for (const std::uint64_t seed : cfg.seeds) {
      if (narrowed && (arm.name != only_arm || seed != only_seed)) continue;
      const fs::path dir =
          fs::path(cfg.out_dir) / cfg.experiment / arm.name / ("seed_" + std::to_string(seed));
      std::string resume_path;
      if (narrowed) {
        resume_path = opt.resume;
      } else if (opt.resume == "auto" && fs::exists(dir / "checkpoint.json")) {
        resume_path = (dir / "checkpoint.json").string();
      }
      RunTask task;
      task.what = cfg.experiment + "/" + arm.name + " seed " + std::to_string(seed);
      task.run = [arm_cfg, name = arm.name, seed, dir, resume_path, actor_critic] {
        if (actor_critic)
          run_portal_ac_single(arm_cfg, name, seed, dir, resume_path);
        else
          run_portal_q_single(arm_cfg, name, seed, dir, resume_path);
      };
      tasks.push_back(std::move(task));
    }
  }
  if (narrowed && tasks.empty())
    throw std::invalid_argument("resume: checkpoint's arm/seed not in this config");
  return tasks;
}

}  // namespace himo::harness
