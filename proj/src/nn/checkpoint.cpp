#include "lootcrawl/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace lootcrawl::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

using nlohmann::json;

json net_config_to_json(const NetConfig& cfg) {
  return json{{"frontend", to_string(cfg.frontend)},
              {"attr_range", {cfg.attr_range.lo, cfg.attr_range.hi}},
              {"embed_dim", cfg.embed_dim},
              {"conv_filters", cfg.conv_filters},
              {"fc_hidden", cfg.fc_hidden},
              {"property_embed", cfg.property_embed},
              {"property_hidden", cfg.property_hidden},
              {"property_vocab", cfg.property_vocab},
              {"d_model", cfg.d_model},
              {"n_heads", cfg.n_heads},
              {"head_dim", cfg.head_dim},
              {"attention_mlp_hidden", cfg.attention_mlp_hidden},
              {"entity_hidden", cfg.entity_hidden},
              {"outputs", cfg.outputs}};
}

NetConfig net_config_from_json(const json& j) {
  NetConfig cfg;
  cfg.frontend = frontend_from_string(j.at("frontend").get<std::string>());
  if (j.contains("attr_range")) cfg.attr_range = {j["attr_range"].at(0).get<int>(), j["attr_range"].at(1).get<int>()};
  auto opt = [&](const char* key, int& dst) {
    if (j.contains(key)) dst = j[key].get<int>();
  };
  opt("embed_dim", cfg.embed_dim);
  opt("conv_filters", cfg.conv_filters);
  opt("fc_hidden", cfg.fc_hidden);
  opt("property_embed", cfg.property_embed);
  opt("property_hidden", cfg.property_hidden);
  opt("property_vocab", cfg.property_vocab);
  opt("d_model", cfg.d_model);
  opt("n_heads", cfg.n_heads);
  opt("head_dim", cfg.head_dim);
  opt("attention_mlp_hidden", cfg.attention_mlp_hidden);
  opt("entity_hidden", cfg.entity_hidden);
  opt("outputs", cfg.outputs);
  return cfg;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void append_params(json& list, std::string& payload, const ParamStore<float>& store, std::string_view prefix) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& t = store.value(i);
    list.push_back({{"name", std::string(prefix) + store.name(i)}, {"shape", t.shape}, {"dtype", "f32"}});
    payload.append(reinterpret_cast<const char*>(t.ptr()), t.size() * sizeof(float));
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json params = json::array();
  std::string payload;
  append_params(params, payload, ckpt.policy, "");
  if (ckpt.critic) append_params(params, payload, *ckpt.critic, kCriticPrefix);

  const json header{{"frontend", to_string(ckpt.net.frontend)},
                    {"params", params},
                    {"attr_range", {ckpt.net.attr_range.lo, ckpt.net.attr_range.hi}},
                    {"n_heads", ckpt.net.n_heads},
                    {"trained_episodes", ckpt.trained_episodes},
                    {"seed", ckpt.seed},
                    {"init_seed", ckpt.policy.init_seed},
                    {"network", net_config_to_json(ckpt.net)},
                    {"metadata", ckpt.metadata}};
  const std::string header_text = header.dump();

  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  out += payload;
  put_u32(out, crc32_of(payload));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a checkpoint file (bad magic)");
  }
  if (bytes.size() < 12) throw Error(ErrorCode::CrcMismatch, "checkpoint truncated inside the preamble");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionUnsupported, "checkpoint format version " + std::to_string(version) + " is not supported");
  }
  const std::size_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + header_len) throw Error(ErrorCode::CrcMismatch, "checkpoint truncated inside the header");

  json header;
  try {
    header = json::parse(bytes.substr(12, header_len));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ShapeHeaderMismatch, std::string("unreadable checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  std::size_t payload_bytes = 0;
  try {
    ckpt.net = net_config_from_json(header.at("network"));
    if (header.at("frontend").get<std::string>() != to_string(ckpt.net.frontend)) {
      throw Error(ErrorCode::ShapeHeaderMismatch, "frontend field disagrees with network config");
    }
    ckpt.trained_episodes = header.at("trained_episodes").get<long long>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.metadata = header.value("metadata", json::object());
    for (const auto& p : header.at("params")) {
      if (p.at("dtype").get<std::string>() != "f32") throw Error(ErrorCode::ShapeHeaderMismatch, "unsupported dtype");
      payload_bytes += shape_size(p.at("shape").get<Shape>()) * sizeof(float);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ShapeHeaderMismatch, std::string("malformed checkpoint header: ") + e.what());
  }

  const std::size_t payload_at = 12 + header_len;
  if (bytes.size() != payload_at + payload_bytes + 4) {
    throw Error(ErrorCode::CrcMismatch, "checkpoint length does not match its header (truncated or padded)");
  }
  const std::string_view payload = bytes.substr(payload_at, payload_bytes);
  if (crc32_of(payload) != get_u32(bytes, payload_at + payload_bytes)) {
    throw Error(ErrorCode::CrcMismatch, "checkpoint payload CRC32 mismatch");
  }

  ParamStore<float> policy;
  ParamStore<float> critic;
  std::size_t offset = 0;
  for (const auto& p : header["params"]) {
    auto name = p["name"].get<std::string>();
    Tensor<float> t(p["shape"].get<Shape>());
    std::memcpy(t.ptr(), payload.data() + offset, t.size() * sizeof(float));
    offset += t.size() * sizeof(float);
    if (name.rfind(kCriticPrefix, 0) == 0) {
      critic.add(name.substr(kCriticPrefix.size()), std::move(t));
    } else {
      policy.add(std::move(name), std::move(t));
    }
  }

  auto check = [&](const ParamStore<float>& got, const NetConfig& cfg, const char* what) {
    const auto want = param_layout(cfg);
    if (got.size() != want.size()) throw Error(ErrorCode::ShapeHeaderMismatch, std::string(what) + " parameter count differs from network config");
    for (std::size_t i = 0; i < want.size(); ++i) {
      if (got.name(i) != want[i].first || got.value(i).shape != want[i].second) {
        throw Error(ErrorCode::ShapeHeaderMismatch, std::string(what) + " tensor " + got.name(i) + " " + shape_string(got.value(i).shape) +
                                                        " does not match expected " + want[i].first + " " + shape_string(want[i].second));
      }
    }
  };
  check(policy, ckpt.net, "policy");
  policy.init_seed = header.value("init_seed", std::uint64_t{0});
  ckpt.policy = std::move(policy);
  if (critic.size() > 0) {
    check(critic, critic_config(ckpt.net), "critic");
    critic.init_seed = ckpt.policy.init_seed;
    ckpt.critic = std::move(critic);
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace lootcrawl::nn
