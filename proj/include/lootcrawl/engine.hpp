#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "lootcrawl/error.hpp"
#include "lootcrawl/rng.hpp"

namespace lootcrawl {

inline constexpr int kNumActions = 17;
inline constexpr int kMaxSide = 10;
inline constexpr int kNumAttributes = 4;

/// Integer codes double as observation categories; do not reorder.
enum class EntityKind : std::uint8_t {
  Impassable = 0,
  Empty = 1,
  Agent = 2,
  Player = 3,
  MeleeWeapon = 4,
  RangedWeapon = 5,
  Potion = 6,
};
inline constexpr int kNumEntityKinds = 7;

constexpr bool is_loot_kind(EntityKind k) {
  return k == EntityKind::MeleeWeapon || k == EntityKind::RangedWeapon || k == EntityKind::Potion;
}
/// 0 = melee, 1 = ranged, 2 = potion.
constexpr int loot_index(EntityKind k) { return static_cast<int>(k) - static_cast<int>(EntityKind::MeleeWeapon); }
constexpr EntityKind loot_kind_at(int index) { return static_cast<EntityKind>(index + static_cast<int>(EntityKind::MeleeWeapon)); }

std::string_view to_string(EntityKind k);

/// Attribute bonuses in the order HP, ATK, DEF, DEX.
struct AttributeVector {
  int hp_bonus = 0;
  int atk_bonus = 0;
  int def_bonus = 0;
  int dex_bonus = 0;

  std::array<int, kNumAttributes> as_array() const { return {hp_bonus, atk_bonus, def_bonus, dex_bonus}; }
  static AttributeVector from_array(const std::array<int, kNumAttributes>& a) { return {a[0], a[1], a[2], a[3]}; }
  static AttributeVector uniform(int v) { return {v, v, v, v}; }
  bool within(int lo, int hi) const;

  friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
};

struct LootItem {
  EntityKind kind = EntityKind::MeleeWeapon;
  AttributeVector bonuses;

  friend bool operator==(const LootItem&, const LootItem&) = default;
};

struct ActorStats {
  int hp = 20;
  int max_hp = 20;
  int atk = 0;
  int def = 0;
  int dex = 0;

  friend bool operator==(const ActorStats&, const ActorStats&) = default;
};

enum class Role : std::uint8_t { Agent = 0, Player = 1 };
constexpr Role other(Role r) { return r == Role::Agent ? Role::Player : Role::Agent; }

struct Position {
  int x = 0;
  int y = 0;

  friend bool operator==(const Position&, const Position&) = default;
  friend Position operator+(Position a, Position b) { return {a.x + b.x, a.y + b.y}; }
};

/// Compass order shared by move/melee (0-7) and ranged (8-15) actions.
inline constexpr std::array<Position, 8> kDirections = {{
    {0, -1},   // N
    {1, -1},   // NE
    {1, 0},    // E
    {1, 1},    // SE
    {0, 1},    // S
    {-1, 1},   // SW
    {-1, 0},   // W
    {-1, -1},  // NW
}};

struct Actor {
  Role role = Role::Agent;
  Position position;
  ActorStats stats;
  std::optional<LootItem> melee_slot;
  std::optional<LootItem> ranged_slot;
  std::optional<LootItem> potion_slot;

  friend bool operator==(const Actor&, const Actor&) = default;
};

/// Initial condition of an actor at episode start.
struct ActorConfig {
  int max_hp = 20;
  int hp = 20;
  int atk = 5;
  int def = 3;
  int dex = 5;
  std::optional<LootItem> melee;
  std::optional<LootItem> ranged;
  std::optional<LootItem> potion;
};

/// Global rule limits.
struct EngineRules {
  int max_steps = 100;
  int stat_min = 0;
  int stat_max = 10;
  int attr_lo = -5;  ///< valid AttributeVector component range
  int attr_hi = 5;

  friend bool operator==(const EngineRules&, const EngineRules&) = default;
};

struct MapSpec {
  int width = 5;
  int height = 5;
  std::vector<Position> impassable;
  std::vector<std::pair<Position, LootItem>> loot;
  Position agent_spawn;
  Position player_spawn;

  friend bool operator==(const MapSpec&, const MapSpec&) = default;
};

enum class TileKind : std::uint8_t { Empty, Impassable, Loot };

struct Tile {
  TileKind kind = TileKind::Empty;
  LootItem loot;  ///< meaningful only when kind == Loot

  friend bool operator==(const Tile&, const Tile&) = default;
};

enum class GameResult : std::uint8_t { Ongoing, AgentWin, AgentLoss, Draw };
std::string_view to_string(GameResult r);

/// Every recordable consequence of one action.
struct Event {
  enum class Type : std::uint8_t { Moved, Bumped, MeleeHit, RangedHit, RangedMiss, PickedUp, DrankPotion, NoOp };
  Type type = Type::NoOp;
  int damage = 0;  ///< MeleeHit / RangedHit
  LootItem item;   ///< PickedUp / DrankPotion

  friend bool operator==(const Event&, const Event&) = default;
};
std::string_view to_string(Event::Type t);

struct StepOutcome {
  double reward = 0.0;  ///< from the learning agent's perspective
  bool done = false;
  GameResult result = GameResult::Ongoing;
  Role actor = Role::Agent;
  std::vector<Event> events;
};

class GameState {
 public:
  int width() const { return width_; }
  int height() const { return height_; }
  int turn() const { return turn_; }
  Role whose_turn() const { return whose_turn_; }
  GameResult result() const { return result_; }
  const EngineRules& rules() const { return rules_; }

  bool in_bounds(Position p) const { return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_; }
  const Tile& tile(Position p) const { return tiles_[index(p)]; }
  const std::vector<Tile>& tiles() const { return tiles_; }

  const Actor& actor(Role r) const { return r == Role::Agent ? agent_ : player_; }
  const Actor& agent() const { return agent_; }
  const Actor& player() const { return player_; }

  /// Occupant code of a cell, actors taking precedence over the tile beneath.
  EntityKind kind_at(Position p) const;

  friend bool operator==(const GameState&, const GameState&) = default;

 private:
  friend GameState new_game(const MapSpec&, const ActorConfig&, const ActorConfig&, std::uint64_t, const EngineRules&);
  friend StepOutcome apply_action(GameState&, int);
  friend class GameStateEditor;

  std::size_t index(Position p) const { return static_cast<std::size_t>(p.y * width_ + p.x); }
  Actor& mutable_actor(Role r) { return r == Role::Agent ? agent_ : player_; }

  int width_ = 0;
  int height_ = 0;
  std::vector<Tile> tiles_;
  Actor agent_;
  Actor player_;
  int turn_ = 0;
  Role whose_turn_ = Role::Agent;
  GameResult result_ = GameResult::Ongoing;
  EngineRules rules_;
  Rng rng_;
};

/// Test and tooling hook for constructing states the generators would not produce.
class GameStateEditor {
 public:
  explicit GameStateEditor(GameState& s) : s_(s) {}
  Actor& actor(Role r) { return s_.mutable_actor(r); }
  Tile& tile(Position p) { return s_.tiles_[s_.index(p)]; }
  void set_turn(int turn) { s_.turn_ = turn; }
  void set_whose_turn(Role r) { s_.whose_turn_ = r; }
  Rng& rng() { return s_.rng_; }

 private:
  GameState& s_;
};

GameState new_game(const MapSpec& map, const ActorConfig& agent_cfg, const ActorConfig& player_cfg, std::uint64_t seed,
                   const EngineRules& rules = {});

/// Resolves one action for the actor whose turn it is. Out-of-place actions are
/// accepted and resolve to NoOp; only ids outside [0, 16] are rejected.
StepOutcome apply_action(GameState& state, int action);

int melee_damage(const Actor& attacker, const Actor& defender);
int ranged_damage(const Actor& attacker, const Actor& defender);
double ranged_hit_chance(const Actor& attacker, const Actor& defender);

/// Ranged attack of the actor whose turn it is; consumes a combat draw only when
/// the shot has a target.
Event ranged_attack(GameState& state, int direction);

/// True iff no impassable tile lies strictly between the endpoints along one of
/// the eight compass rays.
bool line_of_sight(const GameState& state, Position from, Position to);

/// Applies potion bonuses to base stats with clamping.
ActorStats apply_bonuses(const ActorStats& stats, const AttributeVector& bonuses, const EngineRules& rules);

}  // namespace lootcrawl
