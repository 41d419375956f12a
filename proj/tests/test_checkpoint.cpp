#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "lootcrawl/nn/checkpoint.hpp"
#include "nn_support.hpp"

namespace lootcrawl::nn {
namespace {

Checkpoint make_checkpoint(FrontendKind f, bool with_critic = true) {
  Checkpoint c;
  c.net = test::tiny_net(f);
  c.policy = init_params<float>(c.net, 41);
  // non-zero biases so a dropped or shifted tensor is visible
  Rng rng(2);
  for (std::size_t i = 0; i < c.policy.size(); ++i)
    for (auto& v : c.policy.value(i).data) v += static_cast<float>(0.01 * rng.uniform());
  if (with_critic) c.critic = init_params<float>(critic_config(c.net), 42);
  c.trained_episodes = 123;
  c.seed = 9;
  c.metadata = {{"npc_class", "warrior"}};
  return c;
}

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[at + static_cast<std::size_t>(k)]);
  return v;
}

void write_u32(std::string& b, std::size_t at, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b[at + static_cast<std::size_t>(k)] = static_cast<char>((v >> (8 * k)) & 0xff);
}

/// Bitwise reflected CRC-32 (poly 0xEDB88320), independent of the table-driven library routine.
std::uint32_t crc32_bitwise(std::string_view data) {
  std::uint32_t crc = 0xffffffffu;
  for (unsigned char c : data) {
    crc ^= c;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xedb88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

ErrorCode load_error(std::string_view bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "checkpoint unexpectedly loaded";
  return ErrorCode::Io;
}

TEST(Checkpoint, RoundTripGivesBitIdenticalOutputs) {
  const GameState s = test::toy_state_3x3();
  for (FrontendKind f : test::kAllFrontends) {
    const Checkpoint c = make_checkpoint(f);
    const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
    EXPECT_EQ(back.net, c.net);
    EXPECT_EQ(back.policy, c.policy);
    ASSERT_TRUE(back.critic.has_value());
    EXPECT_EQ(*back.critic, *c.critic);
    EXPECT_EQ(back.trained_episodes, 123);
    EXPECT_EQ(back.seed, 9u);
    EXPECT_EQ(back.metadata.at("npc_class"), "warrior");
    const Observation obs = observe_for(c.net, s, Role::Agent);
    const auto a = forward_policy(c.net, c.policy, obs), b = forward_policy(back.net, back.policy, obs);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)), 0);
    const float va = forward_value(c.net, *c.critic, obs), vb = forward_value(back.net, *back.critic, obs);
    EXPECT_EQ(std::memcmp(&va, &vb, sizeof(float)), 0);
  }
}

TEST(Checkpoint, PolicyOnlyRoundTrip) {
  const Checkpoint c = make_checkpoint(FrontendKind::Categorical, false);
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
  EXPECT_FALSE(back.critic.has_value());
  EXPECT_EQ(back.policy, c.policy);
}

TEST(Checkpoint, ByteLayout) {
  const Checkpoint c = make_checkpoint(FrontendKind::DenseEmbedding);
  const std::string b = serialize_checkpoint(c);
  EXPECT_EQ(b.substr(0, 4), "ADNC");
  EXPECT_EQ(read_u32(b, 4), 1u);
  const std::uint32_t header_len = read_u32(b, 8);
  const auto header = nlohmann::json::parse(b.substr(12, header_len));
  EXPECT_EQ(header.at("frontend"), "dense");
  EXPECT_EQ(header.at("n_heads"), c.net.n_heads);
  std::size_t floats = 0;
  for (const auto& p : header.at("params")) {
    EXPECT_EQ(p.at("dtype"), "f32");
    floats += shape_size(p.at("shape").get<Shape>());
  }
  EXPECT_EQ(floats, c.policy.parameter_count() + c.critic->parameter_count());
  const std::size_t payload_at = 12 + header_len;
  ASSERT_EQ(b.size(), payload_at + 4 * floats + 4);
  const std::string_view payload(b.data() + payload_at, 4 * floats);
  EXPECT_EQ(read_u32(b, b.size() - 4), crc32_bitwise(payload));
  float first = 0;
  std::memcpy(&first, payload.data(), 4);
  EXPECT_EQ(first, c.policy.value(0)[0]);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const Checkpoint c = make_checkpoint(FrontendKind::Transformer);
  const std::string good = serialize_checkpoint(c);
  const std::uint32_t header_len = read_u32(good, 8);

  EXPECT_EQ(load_error(good.substr(0, good.size() - 9)), ErrorCode::CrcMismatch);
  EXPECT_EQ(load_error(good.substr(0, 7)), ErrorCode::CrcMismatch);

  std::string flipped = good;
  flipped[12 + header_len + 17] ^= 0x10;
  EXPECT_EQ(load_error(flipped), ErrorCode::CrcMismatch);

  std::string magic = good;
  magic[0] = 'X';
  EXPECT_EQ(load_error(magic), ErrorCode::BadMagic);

  std::string version = good;
  write_u32(version, 4, 2);
  EXPECT_EQ(load_error(version), ErrorCode::VersionUnsupported);
}

/// Rebuild a file with a modified header, the payload cut to what the header
/// declares, and a fresh CRC, so only the header check can object.
std::string with_header(const std::string& good, const std::function<void(nlohmann::json&)>& edit) {
  const std::uint32_t header_len = read_u32(good, 8);
  auto header = nlohmann::json::parse(good.substr(12, header_len));
  edit(header);
  std::size_t floats = 0;
  for (const auto& p : header.at("params")) floats += shape_size(p.at("shape").get<Shape>());
  const std::string h = header.dump();
  const std::string payload = good.substr(12 + header_len, 4 * floats);
  std::string out = good.substr(0, 12) + h + payload + std::string(4, '\0');
  write_u32(out, 8, static_cast<std::uint32_t>(h.size()));
  write_u32(out, out.size() - 4, crc32_bitwise(payload));
  return out;
}

TEST(Checkpoint, ShapeHeaderMismatch) {
  const std::string good = serialize_checkpoint(make_checkpoint(FrontendKind::DenseEmbedding));
  EXPECT_NO_THROW(deserialize_checkpoint(with_header(good, [](nlohmann::json&) {})));
  EXPECT_EQ(load_error(with_header(good, [](nlohmann::json& h) { h["frontend"] = "transformer"; })), ErrorCode::ShapeHeaderMismatch);
  EXPECT_EQ(load_error(with_header(good, [](nlohmann::json& h) { h["params"][0]["dtype"] = "f16"; })), ErrorCode::ShapeHeaderMismatch);
  EXPECT_EQ(load_error(with_header(good, [](nlohmann::json& h) {
              auto s = h["params"][0]["shape"].get<Shape>();
              std::swap(s[0], s[1]);
              h["params"][0]["shape"] = s;
            })),
            ErrorCode::ShapeHeaderMismatch);
  EXPECT_EQ(load_error(with_header(good, [](nlohmann::json& h) { h["params"].erase(h["params"].size() - 1); })),
            ErrorCode::ShapeHeaderMismatch);
}

TEST(Checkpoint, FileRoundTripAndMissingFile) {
  const auto dir = std::filesystem::temp_directory_path() / "lootcrawl_ckpt_test";
  std::filesystem::create_directories(dir);
  const Checkpoint c = make_checkpoint(FrontendKind::Categorical);
  save_checkpoint(c, dir / "a.adnc");
  EXPECT_EQ(load_checkpoint(dir / "a.adnc").policy, c.policy);
  try {
    load_checkpoint(dir / "missing.adnc");
    FAIL() << "expected Io";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
  std::filesystem::remove_all(dir);
}

TEST(NetConfigJson, RoundTrip) {
  NetConfig c = test::tiny_net(FrontendKind::Transformer);
  c.attr_range = {-5, 5};
  EXPECT_EQ(net_config_from_json(net_config_to_json(c)), c);
}

}  // namespace
}  // namespace lootcrawl::nn
