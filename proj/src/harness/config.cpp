#include "himo/harness/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace himo {

namespace {

std::string format_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string seeds_to_string(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoull(tok));
  }
  return out;
}

}  // namespace

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "portal_ac") {
    c.weights = {0.25, 0.5};
    c.k = 5;
    c.unroll = 20;
    c.target.gamma = 0.99;
    c.target.n = 5;
    c.lr = 5e-4;
    c.batch = 32;
    c.model_loss = ModelLossKind::xent;
    c.entropy_coef = 0.01;
    c.net.obs_dim = 7 * 23 * 3;
    c.net.n_actions = 4;
    c.net.core_hidden = 64;
    c.net.d = 3;
    c.net.phi_hidden = 64;
    c.net.phi_hat_hidden = 64;
    c.net.head_hidden = 64;
    c.net.head_kind = HeadKind::state_value;
    c.net.with_policy = true;
    c.total_steps = 2200;
    c.eval_interval = 25;
    c.probe_interval = 200;
  } else if (experiment == "portal_q") {
    c.weights = {0.01, 1.0};
    c.k = 5;
    c.unroll = 20;
    c.target.gamma = 0.99;
    c.target.n = 5;
    c.target.lambda = 0.7;
    c.target.use_rescale = true;
    c.target.rescale_epsilon = 1e-3;
    c.target.target_update_interval = 400;
    c.lr = 2e-4;
    c.batch = 16;
    c.model_loss = ModelLossKind::squared;
    c.net.obs_dim = 7 * 23 * 3;
    c.net.n_actions = 4;
    c.net.core_hidden = 64;
    c.net.d = 3;
    c.net.head_kind = HeadKind::action_value;
    c.net.with_policy = false;
    c.total_steps = 2000;
    c.eval_interval = 25;
    c.epsilon_start = 1.0;
    c.epsilon_end = 0.05;
    c.epsilon_anneal = 50000;
    c.replay_capacity = 500;
    c.replay_min = 32;
  } else if (experiment == "mrp") {
    c.total_steps = 20000;
    c.eval_interval = 500;
    c.batch = 32;
    c.lr = 1e-3;
    c.mrp_alpha = 0.5;
    c.mrp_beta = 1.0;
    c.seeds = {1};
  } else if (experiment == "chain") {
    c.total_steps = 100;
    c.seeds = {1};
  } else if (experiment == "proposition") {
    c.prop_instances = 1000;
    c.seeds = {1};
  } else {
    throw std::invalid_argument("unknown experiment: " + experiment);
  }
  return c;
}

namespace {

using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto x = s.find_first_not_of(" \t");
      const auto y = s.find_last_not_of(" \t");
      s = x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    trim(key);
    trim(value);
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                 ": empty key");
    kv[key] = value;
  }
  return kv;
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto as_ull = [&] { return std::stoull(value); };
  auto as_long = [&] { return std::stol(value); };
  auto as_double = [&] { return std::stod(value); };
  auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config: boolean key '" + key + "' wants true/false, got '" +
                                value + "'");
  };

  if (key == "experiment") return;  // handled by the caller
  if (key == "seeds") { c.seeds = parse_seeds(value); return; }
  if (key == "out_dir") { c.out_dir = value; return; }
  if (key == "total_steps") { c.total_steps = as_long(); return; }
  if (key == "eval_interval") { c.eval_interval = as_long(); return; }
  if (key == "checkpoint_interval") { c.checkpoint_interval = as_long(); return; }
  if (key == "obs_dim") { c.net.obs_dim = as_size(); return; }
  if (key == "n_actions") { c.net.n_actions = as_size(); return; }
  if (key == "core_hidden") { c.net.core_hidden = as_size(); return; }
  if (key == "d") { c.net.d = as_size(); return; }
  if (key == "phi_hidden") { c.net.phi_hidden = as_size(); return; }
  if (key == "phi_hat_hidden") { c.net.phi_hat_hidden = as_size(); return; }
  if (key == "head_hidden") { c.net.head_hidden = as_size(); return; }
  if (key == "head_kind") {
    if (value == "state_value") c.net.head_kind = HeadKind::state_value;
    else if (value == "action_value") c.net.head_kind = HeadKind::action_value;
    else throw std::invalid_argument(
        "config: head_kind wants state_value|action_value, got '" + value + "'");
    return;
  }
  if (key == "with_policy") { c.net.with_policy = as_bool(); return; }
  if (key == "k") { c.k = as_size(); return; }
  if (key == "unroll") { c.unroll = as_size(); return; }
  if (key == "alpha") { c.weights.alpha = as_double(); return; }
  if (key == "beta") { c.weights.beta = as_double(); return; }
  if (key == "n_step") { c.target.n = as_size(); return; }
  if (key == "gamma") { c.target.gamma = as_double(); return; }
  if (key == "lambda") { c.target.lambda = as_double(); return; }
  if (key == "use_rescale") { c.target.use_rescale = as_bool(); return; }
  if (key == "rescale_epsilon") { c.target.rescale_epsilon = as_double(); return; }
  if (key == "target_update_interval") { c.target.target_update_interval = as_long(); return; }
  if (key == "model_loss") {
    if (value == "squared") c.model_loss = ModelLossKind::squared;
    else if (value == "xent") c.model_loss = ModelLossKind::xent;
    else throw std::invalid_argument("config: model_loss wants squared|xent, got '" + value + "'");
    return;
  }
  if (key == "entropy_coef") { c.entropy_coef = as_double(); return; }
  if (key == "lr") { c.lr = as_double(); return; }
  if (key == "batch") { c.batch = as_size(); return; }
  if (key == "epsilon_start") { c.epsilon_start = as_double(); return; }
  if (key == "epsilon_end") { c.epsilon_end = as_double(); return; }
  if (key == "epsilon_anneal") { c.epsilon_anneal = as_long(); return; }
  if (key == "replay_capacity") { c.replay_capacity = as_size(); return; }
  if (key == "replay_min") { c.replay_min = as_size(); return; }
  if (key == "time_limit") { c.time_limit = static_cast<int>(as_long()); return; }
  if (key == "mrp_dim") { c.mrp_dim = as_size(); return; }
  if (key == "mrp_dim_useful") { c.mrp_dim_useful = as_size(); return; }
  if (key == "mrp_hidden") { c.mrp_hidden = as_size(); return; }
  if (key == "mrp_noise_std") { c.mrp_noise_std = as_double(); return; }
  if (key == "mrp_instances") { c.mrp_instances = as_size(); return; }
  if (key == "mrp_repeats") { c.mrp_repeats = as_size(); return; }
  if (key == "mrp_alpha") { c.mrp_alpha = as_double(); return; }
  if (key == "mrp_beta") { c.mrp_beta = as_double(); return; }
  if (key == "eval_states") { c.eval_states = as_size(); return; }
  if (key == "chain_n") { c.chain_n = as_size(); return; }
  if (key == "chain_m") { c.chain_m = as_size(); return; }
  if (key == "prop_instances") { c.prop_instances = as_size(); return; }
  if (key == "prop_mc_samples") { c.prop_mc_samples = as_size(); return; }
  if (key == "probe_interval") { c.probe_interval = as_long(); return; }
  if (key == "probe_target_samples") { c.probe_target_samples = as_size(); return; }
  if (key == "probe_max_episodes") { c.probe_max_episodes = as_size(); return; }
  (void)as_ull;
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  const KvMap kv = parse_kv(text);
  const auto exp_it = kv.find("experiment");
  if (exp_it == kv.end())
    throw std::invalid_argument("config: missing required key 'experiment'");
  ExperimentConfig c = default_config(exp_it->second);
  for (const auto& [key, value] : kv) apply_key(c, key, value);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override '" + kv + "': expected key=value");
    const std::string key = kv.substr(0, eq);
    if (key == "experiment")
      throw std::invalid_argument("override: the experiment key selects the defaults and "
                                  "cannot be overridden; use a config file instead");
    apply_key(cfg, key, kv.substr(eq + 1));
  }
}

ValidationReport validate_config(const ExperimentConfig& c) {
  ValidationReport rep;
  auto err = [&](const std::string& m) { rep.errors.push_back(m); };
  auto warn = [&](const std::string& m) { rep.warnings.push_back(m); };

  const bool known = c.experiment == "mrp" || c.experiment == "portal_ac" ||
                     c.experiment == "portal_q" || c.experiment == "chain" ||
                     c.experiment == "proposition";
  if (!known) err("experiment: unknown value '" + c.experiment + "'");
  if (c.seeds.empty()) err("seeds: need at least one seed");
  if (c.total_steps < 0) err("total_steps: must be >= 0");
  if (c.net.d == 0) err("d: feature bottleneck width must be >= 1");
  if (c.net.core_hidden == 0) err("core_hidden: must be >= 1");
  if (c.batch == 0) err("batch: must be >= 1");
  if (c.lr <= 0.0) err("lr: must be positive");
  if (c.target.gamma < 0.0 || c.target.gamma > 1.0) err("gamma: must be in [0, 1]");
  if (c.target.lambda < 0.0 || c.target.lambda > 1.0) err("lambda: must be in [0, 1]");
  if (c.target.n == 0) err("n_step: must be >= 1");
  if (c.weights.alpha < 0.0 || c.weights.beta < 0.0)
    err("alpha/beta: loss weights must be non-negative");
  if (c.experiment == "portal_ac" || c.experiment == "portal_q") {
    if (c.net.obs_dim == 0) err("obs_dim: must be set for portal experiments");
    if (c.net.n_actions == 0) err("n_actions: must be set for portal experiments");
    if (c.unroll < 2) err("unroll: need at least 2 observation slots");
    if (c.k == 0) err("k: hindsight window must be >= 1");
    if (c.k >= c.unroll)
      err("k: hindsight window must fit inside the unroll (k < unroll)");
    if (c.time_limit < 1) err("time_limit: must be >= 1");
  }
  if (c.experiment == "portal_q") {
    if (c.replay_capacity == 0) err("replay_capacity: must be >= 1");
    if (c.replay_min > c.replay_capacity)
      err("replay_min: cannot exceed replay_capacity");
    if (c.epsilon_start < 0 || c.epsilon_start > 1 || c.epsilon_end < 0 || c.epsilon_end > 1)
      err("epsilon_start/epsilon_end: must be in [0, 1]");
    if (c.target.target_update_interval <= 0)
      err("target_update_interval: must be >= 1");
  }
  if (c.experiment == "mrp") {
    if (c.mrp_dim_useful == 0 || c.mrp_dim_useful >= c.mrp_dim)
      err("mrp_dim_useful: need 0 < mrp_dim_useful < mrp_dim");
    if (c.mrp_instances == 0 || c.mrp_repeats == 0)
      err("mrp_instances/mrp_repeats: must be >= 1");
    if (c.mrp_alpha < 0 || c.mrp_beta < 0) err("mrp_alpha/mrp_beta: must be non-negative");
    if (c.eval_states == 0) err("eval_states: must be >= 1");
  }
  if (c.experiment == "chain") {
    if (c.chain_n == 0 || c.chain_m == 0) err("chain_n/chain_m: must be >= 1");
  }
  if (c.experiment == "proposition") {
    if (c.prop_instances == 0) err("prop_instances: must be >= 1");
  }
  if (c.eval_interval < 0) err("eval_interval: must be >= 0");
  if (c.checkpoint_interval < 0) err("checkpoint_interval: must be >= 0");
  if (c.probe_interval < 0) err("probe_interval: must be >= 0");

  // The feature model should adapt faster than the hindsight value pulls on
  // it; equal or inverted weights train but usually underperform.
  if (c.weights.beta > 0.0 && c.weights.alpha >= c.weights.beta)
    warn("alpha >= beta: the feature-model loss usually wants the larger weight");
  return rep;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  kv["experiment"] = c.experiment;
  kv["seeds"] = seeds_to_string(c.seeds);
  kv["out_dir"] = c.out_dir;
  kv["total_steps"] = std::to_string(c.total_steps);
  kv["eval_interval"] = std::to_string(c.eval_interval);
  kv["checkpoint_interval"] = std::to_string(c.checkpoint_interval);
  kv["obs_dim"] = std::to_string(c.net.obs_dim);
  kv["n_actions"] = std::to_string(c.net.n_actions);
  kv["core_hidden"] = std::to_string(c.net.core_hidden);
  kv["d"] = std::to_string(c.net.d);
  kv["phi_hidden"] = std::to_string(c.net.phi_hidden);
  kv["phi_hat_hidden"] = std::to_string(c.net.phi_hat_hidden);
  kv["head_hidden"] = std::to_string(c.net.head_hidden);
  kv["head_kind"] =
      c.net.head_kind == HeadKind::action_value ? "action_value" : "state_value";
  kv["with_policy"] = c.net.with_policy ? "true" : "false";
  kv["k"] = std::to_string(c.k);
  kv["unroll"] = std::to_string(c.unroll);
  kv["alpha"] = format_num(c.weights.alpha);
  kv["beta"] = format_num(c.weights.beta);
  kv["n_step"] = std::to_string(c.target.n);
  kv["gamma"] = format_num(c.target.gamma);
  kv["lambda"] = format_num(c.target.lambda);
  kv["use_rescale"] = c.target.use_rescale ? "true" : "false";
  kv["rescale_epsilon"] = format_num(c.target.rescale_epsilon);
  kv["target_update_interval"] = std::to_string(c.target.target_update_interval);
  kv["model_loss"] = c.model_loss == ModelLossKind::squared ? "squared" : "xent";
  kv["entropy_coef"] = format_num(c.entropy_coef);
  kv["lr"] = format_num(c.lr);
  kv["batch"] = std::to_string(c.batch);
  kv["epsilon_start"] = format_num(c.epsilon_start);
  kv["epsilon_end"] = format_num(c.epsilon_end);
  kv["epsilon_anneal"] = std::to_string(c.epsilon_anneal);
  kv["replay_capacity"] = std::to_string(c.replay_capacity);
  kv["replay_min"] = std::to_string(c.replay_min);
  kv["time_limit"] = std::to_string(c.time_limit);
  kv["mrp_dim"] = std::to_string(c.mrp_dim);
  kv["mrp_dim_useful"] = std::to_string(c.mrp_dim_useful);
  kv["mrp_hidden"] = std::to_string(c.mrp_hidden);
  kv["mrp_noise_std"] = format_num(c.mrp_noise_std);
  kv["mrp_instances"] = std::to_string(c.mrp_instances);
  kv["mrp_repeats"] = std::to_string(c.mrp_repeats);
  kv["mrp_alpha"] = format_num(c.mrp_alpha);
  kv["mrp_beta"] = format_num(c.mrp_beta);
  kv["eval_states"] = std::to_string(c.eval_states);
  kv["chain_n"] = std::to_string(c.chain_n);
  kv["chain_m"] = std::to_string(c.chain_m);
  kv["prop_instances"] = std::to_string(c.prop_instances);
  kv["prop_mc_samples"] = std::to_string(c.prop_mc_samples);
  kv["probe_interval"] = std::to_string(c.probe_interval);
  kv["probe_target_samples"] = std::to_string(c.probe_target_samples);
  kv["probe_max_episodes"] = std::to_string(c.probe_max_episodes);

  std::string out;
  for (const auto& [key, value] : kv) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

std::string config_hash(const ExperimentConfig& c) {
  // The hash identifies what an experiment computes; where its files land is
  // storage metadata, so two runs of one config into different directories
  // stamp their outputs identically.
  ExperimentConfig normalized = c;
  normalized.out_dir.clear();
  const std::string text = serialize_config(normalized);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace himo
