#pragma once

// Checkpoint serialisation: JSON documents whose numeric payloads are raw
// little-endian doubles in base64, so save -> load -> save round-trips
// bitwise. The harness composes full documents from these pieces; this
// header only knows how to (de)serialise each piece and how to write a file
// atomically (temp file + rename).

#include <string>
#include <vector>

#include "json.hpp"

#include "himo/envs/portal.hpp"
#include "himo/learning.hpp"
#include "himo/nets.hpp"

namespace himo {

// Raw little-endian f64 bytes <-> base64 text.
std::string doubles_to_base64(const std::vector<double>& v);
std::vector<double> doubles_from_base64(const std::string& text);

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

// Net parameters keyed by partition and tensor name; includes the net
// config, so the result reconstructs without outside help.
nlohmann::json params_to_json(const HimoParams& params);
HimoParams params_from_json(const nlohmann::json& j);

// Optimiser moments, aligned with flatten() order.
nlohmann::json optimizer_to_json(const Optimizer& opt);
void optimizer_from_json(const nlohmann::json& j, Optimizer& opt);

nlohmann::json portal_snapshot_to_json(const PortalEnv::Snapshot& s);
PortalEnv::Snapshot portal_snapshot_from_json(const nlohmann::json& j);

nlohmann::json replay_to_json(const ReplayBuffer& replay);
void replay_from_json(const nlohmann::json& j, ReplayBuffer& replay);

// Atomic write: serialise to `path + ".tmp"`, then rename over `path`.
void save_checkpoint_file(const std::string& path, const nlohmann::json& doc);
nlohmann::json load_checkpoint_file(const std::string& path);

}  // namespace himo
