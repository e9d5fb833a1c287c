#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "himo/analysis/mrp_eval.hpp"
#include "himo/envs/mrp.hpp"
#include "himo/harness/checkpoint.hpp"
#include "himo/rng.hpp"
#include "himo/version.hpp"

#include "runners.hpp"

namespace himo::harness {

namespace {

namespace fs = std::filesystem;

fs::path mrp_run_dir(const ExperimentConfig& cfg, std::size_t instance, std::size_t repeat) {
  return fs::path(cfg.out_dir) / "mrp" / ("instance_" + std::to_string(instance)) /
         ("repeat_" + std::to_string(repeat));
}

nlohmann::json mrp_learner_to_json(const MrpLearner& l) {
  nlohmann::json j;
  const auto part = [](const Partition& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Tensor& t : p) arr.push_back(tensor_to_json(t));
    return arr;
  };
  j["direct"] = part(l.direct);
  j["eta2"] = part(l.eta2);
  j["eta1"] = part(l.eta1);
  j["theta2"] = part(l.theta2);
  j["theta1"] = part(l.theta1);
  j["mb_model"] = part(l.mb_model);
  j["mb_value"] = part(l.mb_value);
  nlohmann::json opt = nlohmann::json::array();
  for (const AdamState& s : l.opt) {
    nlohmann::json sj;
    sj["m"] = tensor_to_json(s.first_moment);
    sj["v"] = tensor_to_json(s.second_moment);
    sj["step_count"] = s.step_count;
    opt.push_back(sj);
  }
  j["opt"] = opt;
  return j;
}

void mrp_learner_from_json(const nlohmann::json& j, MrpLearner& l) {
  const auto part = [](const nlohmann::json& arr, Partition& p) {
    if (arr.size() != p.size())
      throw std::invalid_argument("checkpoint: partition tensor count mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = tensor_from_json(arr[i]);
  };
  part(j.at("direct"), l.direct);
  part(j.at("eta2"), l.eta2);
  part(j.at("eta1"), l.eta1);
  part(j.at("theta2"), l.theta2);
  part(j.at("theta1"), l.theta1);
  part(j.at("mb_model"), l.mb_model);
  part(j.at("mb_value"), l.mb_value);
  const nlohmann::json& opt = j.at("opt");
  if (opt.size() != l.opt.size())
    throw std::invalid_argument("checkpoint: optimiser state count mismatch");
  for (std::size_t i = 0; i < l.opt.size(); ++i) {
    l.opt[i].first_moment = tensor_from_json(opt[i].at("m"));
    l.opt[i].second_moment = tensor_from_json(opt[i].at("v"));
    l.opt[i].step_count = opt[i].at("step_count").get<long>();
  }
}

std::string format_errors_row(long step, const MrpErrors& e, std::size_t instance,
                              std::size_t repeat) {
  return std::to_string(step) + "," + format_double(e.v_direct) + "," + format_double(e.v_m) +
         "," + format_double(e.v_plus) + "," + format_double(e.model_based) + "," +
         std::to_string(instance) + "," + std::to_string(repeat);
}

void run_mrp_single(const ExperimentConfig& cfg, std::size_t instance, std::size_t repeat,
                    const std::string& resume_path) {
  const std::uint64_t master = cfg.seeds.front();
  const std::uint64_t run_index = instance * cfg.mrp_repeats + repeat;
  const fs::path dir = mrp_run_dir(cfg, instance, repeat);

  const MrpInstance env(cfg.mrp_dim, cfg.mrp_dim_useful, cfg.mrp_hidden, cfg.mrp_noise_std,
                        derive_seed(master, seed_tag::instance, instance));

  MrpLearnerConfig lc;
  lc.D = cfg.mrp_dim;
  lc.D2 = cfg.mrp_dim_useful;
  lc.hidden = cfg.mrp_hidden;
  lc.phi_dim = cfg.net.d;
  lc.alpha = cfg.mrp_alpha;
  lc.beta = cfg.mrp_beta;
  lc.lr = cfg.lr;
  MrpLearner learner = init_mrp_learner(lc, derive_seed(master, seed_tag::params, run_index));
  std::mt19937_64 data_rng(derive_seed(master, seed_tag::env, run_index));

  long step = 0;
  OutFile metrics, values;
  const std::string comment = csv_comment(cfg);

  const auto save = [&] {
    nlohmann::json doc;
    doc["kind"] = "mrp";
    doc["arm"] = "instance_" + std::to_string(instance);
    doc["seed"] = repeat;  // run identity within the arm
    doc["config_hash"] = config_hash(cfg);
    doc["version"] = kVersion;
    doc["learner_steps"] = step;
    doc["data_rng"] = rng_to_string(data_rng);
    doc["metrics_bytes"] = metrics.offset();
    doc["values_bytes"] = values.offset();
    doc["learner"] = mrp_learner_to_json(learner);
    save_checkpoint_file((dir / "checkpoint.json").string(), doc);
  };

  if (resume_path.empty()) {
    metrics = OutFile::fresh(dir / "metrics.csv", comment + kMetricCsvHeader + "\n");
    values = OutFile::fresh(dir / "values.csv", comment + kMrpErrorCsvHeader + "\n");
  } else {
    const nlohmann::json doc = load_checkpoint_file(resume_path);
    if (doc.at("kind").get<std::string>() != "mrp" ||
        doc.at("arm").get<std::string>() != "instance_" + std::to_string(instance) ||
        doc.at("seed").get<std::uint64_t>() != repeat)
      throw std::invalid_argument("resume: checkpoint belongs to a different mrp run");
    if (doc.at("config_hash").get<std::string>() != config_hash(cfg))
      throw std::invalid_argument("resume: config hash mismatch");
    step = doc.at("learner_steps").get<long>();
    data_rng = rng_from_string(doc.at("data_rng").get<std::string>());
    mrp_learner_from_json(doc.at("learner"), learner);
    metrics = OutFile::resume_at(dir / "metrics.csv", doc.at("metrics_bytes").get<std::uint64_t>());
    values = OutFile::resume_at(dir / "values.csv", doc.at("values_bytes").get<std::uint64_t>());
  }

  std::vector<MrpEpisode> batch(cfg.batch);
  while (step < cfg.total_steps) {
    for (std::size_t i = 0; i < cfg.batch; ++i) batch[i] = env.sample(data_rng);
    const MrpLossRow losses = mrp_train_step(learner, batch);
    ++step;
    if (cfg.eval_interval > 0 && step % cfg.eval_interval == 0) {
      std::mt19937_64 eval_rng(
          derive_seed(derive_seed(master, seed_tag::eval, run_index), seed_tag::eval,
                      static_cast<std::uint64_t>(step)));
      const MrpErrors errors = mrp_value_errors(learner, env, cfg.eval_states, eval_rng);
      values.line(format_errors_row(step, errors, instance, repeat));
      values.flush();

      MetricTraceRow row;
      row.step = step;
      row.episode_return_mean = std::numeric_limits<double>::quiet_NaN();
      row.l_v = losses.l_direct;
      row.l_vplus = losses.l_vplus;
      row.l_model = losses.l_model;
      row.value_error_vm = errors.v_m;
      row.value_error_vplus = errors.v_plus;
      row.grad_norm = 0.0;
      row.epsilon = 0.0;
      row.seed = master;
      row.env_step = step * static_cast<long>(cfg.batch);
      metrics.line(format_metric_row(row));
      metrics.flush();
      if (cfg.checkpoint_interval > 0 &&
          (step / cfg.eval_interval) % cfg.checkpoint_interval == 0)
        save();
    }
  }
  save();
}

}  // namespace

std::vector<RunTask> mrp_tasks(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::string only_arm;
  std::uint64_t only_repeat = 0;
  const bool narrowed = !opt.resume.empty() && opt.resume != "auto";
  if (narrowed) {
    const nlohmann::json doc = load_checkpoint_file(opt.resume);
    only_arm = doc.at("arm").get<std::string>();
    only_repeat = doc.at("seed").get<std::uint64_t>();
  }

  std::vector<RunTask> tasks;
  for (std::size_t i = 0; i < cfg.mrp_instances; ++i) {
    for (std::size_t r = 0; r < cfg.mrp_repeats; ++r) {
      if (narrowed && (only_arm != "instance_" + std::to_string(i) || only_repeat != r)) continue;
      const fs::path dir = mrp_run_dir(cfg, i, r);
      std::string resume_path;
      if (narrowed) {
        resume_path = opt.resume;
      } else if (opt.resume == "auto" && fs::exists(dir / "checkpoint.json")) {
        resume_path = (dir / "checkpoint.json").string();
      }
      RunTask task;
      task.what = "mrp instance " + std::to_string(i) + " repeat " + std::to_string(r);
      task.run = [cfg, i, r, resume_path] { run_mrp_single(cfg, i, r, resume_path); };
      tasks.push_back(std::move(task));
    }
  }
  if (narrowed && tasks.empty())
    throw std::invalid_argument("resume: checkpoint's instance/repeat not in this config");
  return tasks;
}

void mrp_write_summary(const ExperimentConfig& cfg) {
  // Final-row errors per run, then the cross-run mean per estimator.
  struct Final {
    std::size_t instance, repeat;
    MrpErrors errors;
  };
  std::vector<Final> finals;
  for (std::size_t i = 0; i < cfg.mrp_instances; ++i) {
    for (std::size_t r = 0; r < cfg.mrp_repeats; ++r) {
      const fs::path path = mrp_run_dir(cfg, i, r) / "values.csv";
      std::ifstream in(path);
      if (!in) throw std::runtime_error("missing " + path.string());
      std::string line, last;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
        last = line;
      }
      if (last.empty()) continue;  // zero-step run: nothing to summarise
      std::istringstream row(last);
      std::string tok;
      std::vector<std::string> cols;
      while (std::getline(row, tok, ',')) cols.push_back(tok);
      if (cols.size() < 5) throw std::runtime_error("malformed row in " + path.string());
      Final f;
      f.instance = i;
      f.repeat = r;
      f.errors.v_direct = std::stod(cols[1]);
      f.errors.v_m = std::stod(cols[2]);
      f.errors.v_plus = std::stod(cols[3]);
      f.errors.model_based = std::stod(cols[4]);
      finals.push_back(f);
    }
  }

  OutFile out = OutFile::fresh(fs::path(cfg.out_dir) / "mrp" / "final_errors.csv",
                               csv_comment(cfg) +
                                   "instance,repeat,v_direct,v_m,v_plus,model_based\n");
  MrpErrors mean;
  for (const Final& f : finals) {
    out.line(std::to_string(f.instance) + "," + std::to_string(f.repeat) + "," +
             format_double(f.errors.v_direct) + "," + format_double(f.errors.v_m) + "," +
             format_double(f.errors.v_plus) + "," + format_double(f.errors.model_based));
    mean.v_direct += f.errors.v_direct;
    mean.v_m += f.errors.v_m;
    mean.v_plus += f.errors.v_plus;
    mean.model_based += f.errors.model_based;
  }
  if (!finals.empty()) {
    const double n = static_cast<double>(finals.size());
    out.line("mean,," + format_double(mean.v_direct / n) + "," + format_double(mean.v_m / n) +
             "," + format_double(mean.v_plus / n) + "," + format_double(mean.model_based / n));
  }
  out.flush();
}

}  // namespace himo::harness
