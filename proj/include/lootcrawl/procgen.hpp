#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lootcrawl/engine.hpp"
#include "lootcrawl/rng.hpp"

namespace lootcrawl {

/// Every bonus drawn independently and uniformly from [attr_lo, attr_hi].
struct ProceduralLoot {
  int attr_lo = -3;
  int attr_hi = 5;

  friend bool operator==(const ProceduralLoot&, const ProceduralLoot&) = default;
};

struct LootTemplate {
  LootItem item;
  double weight = 1.0;

  friend bool operator==(const LootTemplate&, const LootTemplate&) = default;
};

/// Weighted item templates. Kinds without any template fall back to the
/// procedural range when one is given.
struct FixedSetLoot {
  std::vector<LootTemplate> templates;
  std::optional<ProceduralLoot> fallback;

  friend bool operator==(const FixedSetLoot&, const FixedSetLoot&) = default;
};

struct LootDistributionSpec {
  std::variant<ProceduralLoot, FixedSetLoot> dist = ProceduralLoot{};

  /// Throws InvalidSpec.
  void validate() const;

  static LootDistributionSpec procedural(int lo = -3, int hi = 5) { return {ProceduralLoot{lo, hi}}; }
  /// Low/medium/high weapons [-2], [0], [+2] for both weapon kinds; potions procedural.
  static LootDistributionSpec uniform_preset();
  /// Low/medium/high weapons [-3], [-2], [+5] for both weapon kinds; potions procedural.
  static LootDistributionSpec skewed_preset();
  /// Looks up "procedural", "uniform" or "skewed"; throws InvalidSpec otherwise.
  static LootDistributionSpec preset(const std::string& name);

  friend bool operator==(const LootDistributionSpec&, const LootDistributionSpec&) = default;
};

LootItem sample_loot(const LootDistributionSpec& spec, EntityKind kind, Rng& rng);

/// Weighted template choice for a uniform draw u in [0, 1): the first template of
/// `kind` whose cumulative normalized weight exceeds u. Returns nullptr when the
/// set has no template of that kind.
const LootTemplate* pick_template(const FixedSetLoot& set, EntityKind kind, double u);

struct IntRange {
  int min = 0;
  int max = 0;

  bool contains(int v) const { return v >= min && v <= max; }
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct CurriculumPhase {
  int until_episode = 0;
  IntRange map_side{5, 7};
  IntRange n_impassable{0, 2};
  std::array<IntRange, 3> n_loot{{{1, 1}, {1, 1}, {1, 1}}};  ///< melee, ranged, potion
  double opponent_max_hp_scale = 1.0;

  void validate() const;
  friend bool operator==(const CurriculumPhase&, const CurriculumPhase&) = default;
};

using Curriculum = std::vector<CurriculumPhase>;

/// Three phases, growing maps and obstacles, opponent reaching full strength last.
Curriculum default_curriculum();

const CurriculumPhase& phase_for_episode(const Curriculum& curriculum, long long episode);
/// Index form of phase_for_episode.
std::size_t phase_index_for_episode(const Curriculum& curriculum, long long episode);

inline constexpr int kMaxGenerationAttempts = 1000;

MapSpec generate_map(const CurriculumPhase& phase, const LootDistributionSpec& loot_spec, Rng& rng);

/// 4-connected path through non-impassable tiles.
bool spawns_connected(const MapSpec& map);

/// Stat presets; the class only changes ActorConfig priors.
enum class NpcClass { Archer, Warrior, Ranger };
std::string_view to_string(NpcClass c);
NpcClass npc_class_from_string(const std::string& name);

ActorConfig class_preset(NpcClass c, int max_hp = 20);

/// Weapon with all-zero bonuses.
LootItem neutral_weapon(EntityKind kind);

/// Training start: each weapon slot independently filled with probability 1/2
/// by a draw from the loot spec.
void randomize_equipment(ActorConfig& cfg, const LootDistributionSpec& spec, Rng& rng);

/// Arena start: full HP and neutral weapons in both slots.
void neutral_equipment(ActorConfig& cfg);

}  // namespace lootcrawl
