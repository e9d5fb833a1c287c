#pragma once

// Flat key=value experiment configuration. A config file starts from the
// named experiment's defaults and overrides individual keys; the canonical
// serialisation (sorted keys) is hashed into every metrics CSV header so a
// trace can always be traced back to its exact settings.

#include <cstdint>
#include <string>
#include <vector>

#include "himo/learning.hpp"
#include "himo/nets.hpp"

namespace himo {

struct ExperimentConfig {
  std::string experiment = "portal_ac";  // mrp | portal_ac | portal_q | chain | proposition
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  std::string out_dir = "out";
  long total_steps = 0;     // learner updates (mrp/portal), samples (chain), instances (prop)
  long eval_interval = 0;   // learner steps between metric rows
  long checkpoint_interval = 0;  // metric rows between checkpoint saves; 0 = final only

  // networks
  NetConfig net;
  std::size_t k = 5;        // hindsight window
  std::size_t unroll = 20;  // observation slots per training window

  // losses / optimisation
  LossWeights weights;
  TargetConfig target;
  ModelLossKind model_loss = ModelLossKind::xent;
  double entropy_coef = 0.01;
  double lr = 5e-4;
  std::size_t batch = 32;

  // q-variant exploration/replay
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  long epsilon_anneal = 50000;  // env steps
  std::size_t replay_capacity = 500;
  std::size_t replay_min = 32;  // sequences before learning starts

  // portal env
  int time_limit = 60;

  // mrp experiment
  std::size_t mrp_dim = 32;
  std::size_t mrp_dim_useful = 4;
  std::size_t mrp_hidden = 16;
  double mrp_noise_std = 1.0;
  std::size_t mrp_instances = 4;
  std::size_t mrp_repeats = 2;
  double mrp_alpha = 0.5;
  double mrp_beta = 1.0;
  std::size_t eval_states = 1024;

  // chain experiment
  std::size_t chain_n = 10;
  std::size_t chain_m = 10;

  // proposition experiment
  std::size_t prop_instances = 1000;
  std::size_t prop_mc_samples = 100000;

  // probe dumps (portal_ac)
  long probe_interval = 0;  // learner steps between dumps; 0 = no probes
  std::size_t probe_target_samples = 250;
  std::size_t probe_max_episodes = 2000;
};

// Defaults for each experiment name; throws std::invalid_argument on an
// unknown name.
ExperimentConfig default_config(const std::string& experiment);

// Parse `key=value` lines ('#' comments, blank lines ignored). The
// `experiment` key is read first and seeds the defaults.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Apply "key=value" overrides on top of a loaded config (the experiment key
// itself cannot be overridden this way). Throws std::invalid_argument.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

ValidationReport validate_config(const ExperimentConfig& cfg);

// Canonical sorted key=value serialisation (includes every field).
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a 64-bit over the canonical serialisation, as 16 hex digits.
// out_dir is excluded: output location does not change what a run computes,
// and resuming a run that was moved to a new directory must still match.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace himo
