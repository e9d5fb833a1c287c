#include "himo/harness/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "himo/rng.hpp"

namespace himo {

namespace {

constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string bytes_to_base64(const unsigned char* data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= n; i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kB64Chars[(v >> 18) & 63];
    out += kB64Chars[(v >> 12) & 63];
    out += kB64Chars[(v >> 6) & 63];
    out += kB64Chars[v & 63];
  }
  if (i + 1 == n) {
    const unsigned v = data[i] << 16;
    out += kB64Chars[(v >> 18) & 63];
    out += kB64Chars[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == n) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out += kB64Chars[(v >> 18) & 63];
    out += kB64Chars[(v >> 12) & 63];
    out += kB64Chars[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<unsigned char> bytes_from_base64(const std::string& text) {
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  unsigned acc = 0;
  int bits = 0;
  for (const char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = b64_value(c);
    if (v < 0) throw std::invalid_argument("checkpoint: bad base64 character");
    acc = (acc << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace

std::string doubles_to_base64(const std::vector<double>& v) {
  std::vector<unsigned char> bytes(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t u;
    std::memcpy(&u, &v[i], 8);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>((u >> (8 * b)) & 0xff);
  }
  return bytes_to_base64(bytes.data(), bytes.size());
}

std::vector<double> doubles_from_base64(const std::string& text) {
  const std::vector<unsigned char> bytes = bytes_from_base64(text);
  if (bytes.size() % 8 != 0)
    throw std::invalid_argument("checkpoint: double payload not a multiple of 8 bytes");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    std::memcpy(&out[i], &u, 8);
  }
  return out;
}

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape;
  j["data"] = doubles_to_base64(t.values);
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
  Tensor t;
  t.shape = j.at("shape").get<Shape>();
  t.values = doubles_from_base64(j.at("data").get<std::string>());
  if (t.values.size() != shape_size(t.shape))
    throw std::invalid_argument("checkpoint: tensor payload does not match its shape");
  return t;
}

namespace {

nlohmann::json net_config_to_json(const NetConfig& c) {
  nlohmann::json j;
  j["obs_dim"] = c.obs_dim;
  j["core_hidden"] = c.core_hidden;
  j["d"] = c.d;
  j["phi_hidden"] = c.phi_hidden;
  j["phi_hat_hidden"] = c.phi_hat_hidden;
  j["head_hidden"] = c.head_hidden;
  j["n_actions"] = c.n_actions;
  j["head_kind"] = c.head_kind == HeadKind::action_value ? "action_value" : "state_value";
  j["with_policy"] = c.with_policy;
  return j;
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.obs_dim = j.at("obs_dim").get<std::size_t>();
  c.core_hidden = j.at("core_hidden").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.phi_hidden = j.at("phi_hidden").get<std::size_t>();
  c.phi_hat_hidden = j.at("phi_hat_hidden").get<std::size_t>();
  c.head_hidden = j.at("head_hidden").get<std::size_t>();
  c.n_actions = j.at("n_actions").get<std::size_t>();
  c.head_kind = j.at("head_kind").get<std::string>() == "action_value" ? HeadKind::action_value
                                                                       : HeadKind::state_value;
  c.with_policy = j.at("with_policy").get<bool>();
  return c;
}

const std::vector<std::string> kPartitionOrder = {"eta3", "eta2", "eta1",
                                                  "theta2", "theta1", "pi"};

const Partition& partition_by_name(const HimoParams& p, const std::string& name) {
  if (name == "eta3") return p.eta3;
  if (name == "eta2") return p.eta2;
  if (name == "eta1") return p.eta1;
  if (name == "theta2") return p.theta2;
  if (name == "theta1") return p.theta1;
  if (name == "pi") return p.pi;
  throw std::invalid_argument("checkpoint: unknown partition " + name);
}

Partition& partition_by_name(HimoParams& p, const std::string& name) {
  return const_cast<Partition&>(partition_by_name(std::as_const(p), name));
}

}  // namespace

nlohmann::json params_to_json(const HimoParams& params) {
  nlohmann::json j;
  j["net"] = net_config_to_json(params.config);
  nlohmann::json parts;
  for (const auto& name : kPartitionOrder) {
    const Partition& part = partition_by_name(params, name);
    if (part.empty()) continue;
    const std::vector<std::string> names = partition_tensor_names(name, params.config);
    if (names.size() != part.size())
      throw std::logic_error("checkpoint: partition name table out of sync for " + name);
    nlohmann::json pj;
    for (std::size_t i = 0; i < part.size(); ++i) pj[names[i]] = tensor_to_json(part[i]);
    parts[name] = pj;
  }
  j["partitions"] = parts;
  return j;
}

HimoParams params_from_json(const nlohmann::json& j) {
  HimoParams params;
  params.config = net_config_from_json(j.at("net"));
  const nlohmann::json& parts = j.at("partitions");
  for (const auto& name : kPartitionOrder) {
    if (!parts.contains(name)) continue;
    const std::vector<std::string> names = partition_tensor_names(name, params.config);
    Partition& part = partition_by_name(params, name);
    part.reserve(names.size());
    for (const auto& tensor_name : names)
      part.push_back(tensor_from_json(parts.at(name).at(tensor_name)));
  }
  return params;
}

nlohmann::json optimizer_to_json(const Optimizer& opt) {
  nlohmann::json j;
  j["lr"] = opt.config.lr;
  j["beta1"] = opt.config.beta1;
  j["beta2"] = opt.config.beta2;
  j["epsilon"] = opt.config.epsilon;
  nlohmann::json states = nlohmann::json::array();
  for (const AdamState& s : opt.states) {
    nlohmann::json sj;
    sj["m"] = tensor_to_json(s.first_moment);
    sj["v"] = tensor_to_json(s.second_moment);
    sj["step_count"] = s.step_count;
    states.push_back(sj);
  }
  j["states"] = states;
  return j;
}

void optimizer_from_json(const nlohmann::json& j, Optimizer& opt) {
  opt.config.lr = j.at("lr").get<double>();
  opt.config.beta1 = j.at("beta1").get<double>();
  opt.config.beta2 = j.at("beta2").get<double>();
  opt.config.epsilon = j.at("epsilon").get<double>();
  const nlohmann::json& states = j.at("states");
  if (states.size() != opt.states.size())
    throw std::invalid_argument("checkpoint: optimiser state count mismatch");
  for (std::size_t i = 0; i < opt.states.size(); ++i) {
    AdamState& s = opt.states[i];
    s.first_moment = tensor_from_json(states[i].at("m"));
    s.second_moment = tensor_from_json(states[i].at("v"));
    s.step_count = states[i].at("step_count").get<long>();
    s.config = opt.config;
  }
}

nlohmann::json portal_snapshot_to_json(const PortalEnv::Snapshot& s) {
  nlohmann::json j;
  j["phase"] = s.phase;
  j["agent"] = {s.agent.row, s.agent.col};
  j["green_portal"] = {s.green_portal.row, s.green_portal.col};
  j["red_portal"] = {s.red_portal.row, s.red_portal.col};
  j["context_count"] = s.context_count;
  j["context_on"] = s.context_on;
  j["room_color"] = s.room_color;
  j["steps_elapsed"] = s.steps_elapsed;
  j["done"] = s.done;
  j["rng"] = s.rng;
  return j;
}

PortalEnv::Snapshot portal_snapshot_from_json(const nlohmann::json& j) {
  PortalEnv::Snapshot s;
  s.phase = j.at("phase").get<int>();
  s.agent = {j.at("agent")[0].get<int>(), j.at("agent")[1].get<int>()};
  s.green_portal = {j.at("green_portal")[0].get<int>(), j.at("green_portal")[1].get<int>()};
  s.red_portal = {j.at("red_portal")[0].get<int>(), j.at("red_portal")[1].get<int>()};
  s.context_count = j.at("context_count").get<int>();
  s.context_on = j.at("context_on").get<std::vector<std::uint8_t>>();
  s.room_color = j.at("room_color").get<int>();
  s.steps_elapsed = j.at("steps_elapsed").get<int>();
  s.done = j.at("done").get<bool>();
  s.rng = j.at("rng").get<std::string>();
  return s;
}

namespace {

nlohmann::json sequence_to_json(const SequenceSample& s) {
  nlohmann::json j;
  const UnrollBatch& u = s.data;
  j["length"] = u.length;
  j["obs_dim"] = u.obs_dim;
  std::vector<double> obs_flat, rew_flat, disc_flat;
  std::vector<int> act_flat;
  std::vector<int> start_flat;
  for (std::size_t t = 0; t < u.length; ++t) {
    obs_flat.insert(obs_flat.end(), u.obs[t].begin(), u.obs[t].end());
    rew_flat.push_back(u.rewards[t][0]);
    disc_flat.push_back(u.discounts[t][0]);
    act_flat.push_back(u.actions[t][0]);
    start_flat.push_back(u.episode_start[t][0]);
  }
  j["obs"] = doubles_to_base64(obs_flat);
  j["rewards"] = doubles_to_base64(rew_flat);
  j["discounts"] = doubles_to_base64(disc_flat);
  j["actions"] = act_flat;
  j["episode_start"] = start_flat;
  j["h0"] = doubles_to_base64(s.h0);
  return j;
}

SequenceSample sequence_from_json(const nlohmann::json& j) {
  SequenceSample s;
  const std::size_t length = j.at("length").get<std::size_t>();
  const std::size_t obs_dim = j.at("obs_dim").get<std::size_t>();
  s.data = UnrollBatch::empty(length, 1, obs_dim);
  const std::vector<double> obs_flat = doubles_from_base64(j.at("obs").get<std::string>());
  const std::vector<double> rew = doubles_from_base64(j.at("rewards").get<std::string>());
  const std::vector<double> disc = doubles_from_base64(j.at("discounts").get<std::string>());
  const std::vector<int> act = j.at("actions").get<std::vector<int>>();
  const std::vector<int> start = j.at("episode_start").get<std::vector<int>>();
  if (obs_flat.size() != length * obs_dim || rew.size() != length || disc.size() != length ||
      act.size() != length || start.size() != length)
    throw std::invalid_argument("checkpoint: replay sequence payload size mismatch");
  for (std::size_t t = 0; t < length; ++t) {
    std::copy(obs_flat.begin() + static_cast<long>(t * obs_dim),
              obs_flat.begin() + static_cast<long>((t + 1) * obs_dim), s.data.obs[t].begin());
    s.data.rewards[t][0] = rew[t];
    s.data.discounts[t][0] = disc[t];
    s.data.actions[t][0] = act[t];
    s.data.episode_start[t][0] = static_cast<std::uint8_t>(start[t]);
  }
  s.h0 = doubles_from_base64(j.at("h0").get<std::string>());
  return s;
}

}  // namespace

nlohmann::json replay_to_json(const ReplayBuffer& replay) {
  nlohmann::json j;
  j["capacity"] = replay.capacity();
  j["head"] = replay.head();
  j["full"] = replay.wrapped();
  j["rng"] = rng_to_string(const_cast<ReplayBuffer&>(replay).rng());
  nlohmann::json entries = nlohmann::json::array();
  for (const SequenceSample& s : replay.snapshot()) entries.push_back(sequence_to_json(s));
  j["entries"] = entries;
  return j;
}

void replay_from_json(const nlohmann::json& j, ReplayBuffer& replay) {
  if (j.at("capacity").get<std::size_t>() != replay.capacity())
    throw std::invalid_argument("checkpoint: replay capacity mismatch");
  std::vector<SequenceSample> entries;
  for (const auto& ej : j.at("entries")) entries.push_back(sequence_from_json(ej));
  replay.restore(std::move(entries), j.at("head").get<std::size_t>(), j.at("full").get<bool>());
  replay.rng() = rng_from_string(j.at("rng").get<std::string>());
}

void save_checkpoint_file(const std::string& path, const nlohmann::json& doc) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp + " for writing");
    out << doc.dump();
    out.flush();
    if (!out) throw std::runtime_error("checkpoint: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("checkpoint: rename to " + path + " failed");
}

nlohmann::json load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  nlohmann::json doc;
  in >> doc;
  return doc;
}

}  // namespace himo
