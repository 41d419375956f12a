#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lootcrawl/arena.hpp"
#include "lootcrawl/train.hpp"

namespace lootcrawl::config {

using nlohmann::json;

inline constexpr int kRunConfigVersion = 1;

/// The published run-config schema (schemas/run_config.schema.json), embedded at build time.
const json& run_config_schema();

struct SchemaIssue {
  std::string path;  ///< JSON pointer into the document
  std::string message;
};

/// Validates against the JSON-Schema subset the run-config schema uses:
/// type, const, enum, properties, required, additionalProperties, items,
/// minItems, maxItems, minProperties, minLength, minimum, maximum,
/// exclusiveMinimum, exclusiveMaximum, oneOf and local "#/$defs/..." refs.
std::vector<SchemaIssue> validate(const json& doc, const json& schema);

json loot_spec_to_json(const LootDistributionSpec& spec);
/// Accepts a preset name or an object; throws InvalidSpec.
LootDistributionSpec loot_spec_from_json(const json& j);

json curriculum_to_json(const Curriculum& c);
Curriculum curriculum_from_json(const json& j);

struct Pairing {
  std::string name;
  std::string a;  ///< checkpoint path; "{class}" is replaced by the class name
  std::string b;
};

struct ArenaPlan {
  int episodes = 100;
  ActionMode action_mode = ActionMode::Sample;
  std::vector<NpcClass> classes{NpcClass::Archer, NpcClass::Warrior, NpcClass::Ranger};
  std::vector<std::pair<std::string, LootDistributionSpec>> distributions{
      {"procedural", LootDistributionSpec::procedural()},
      {"uniform", LootDistributionSpec::uniform_preset()},
      {"skewed", LootDistributionSpec::skewed_preset()}};
  std::vector<Pairing> pairings;
};

struct RunConfig {
  TrainConfig train;
  ArenaPlan arena;
  std::filesystem::path out_dir = "runs/default";
};

/// Schema check followed by semantic checks; throws ConfigInvalid whose message
/// lists every issue.
RunConfig parse_run_config(const json& doc);
/// Throws ConfigInvalid for unreadable or malformed files too.
RunConfig load_run_config(const std::filesystem::path& path);

std::string substitute_class(const std::string& pattern, NpcClass c);

}  // namespace lootcrawl::config
