#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lootcrawl/nn/network.hpp"

namespace lootcrawl::nn {

inline constexpr char kCheckpointMagic[4] = {'A', 'D', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
/// Critic tensors are stored after the policy tensors under this prefix.
inline constexpr std::string_view kCriticPrefix = "critic.";

struct Checkpoint {
  NetConfig net;
  ParamStore<float> policy;
  std::optional<ParamStore<float>> critic;
  long long trained_episodes = 0;
  std::uint64_t seed = 0;
  nlohmann::json metadata = nlohmann::json::object();  ///< free-form, e.g. npc class or config echo
};

nlohmann::json net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

/// Layout: "ADNC" | version u32 | header length u32 | JSON header | f32 payload | CRC32(payload) u32,
/// all integers and floats little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws Io when the file cannot be read, plus the format errors of deserialize_checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lootcrawl::nn
