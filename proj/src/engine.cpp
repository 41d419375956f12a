#include "lootcrawl/engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace lootcrawl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OverlappingSpawns: return "OverlappingSpawns";
    case ErrorCode::InvalidMap: return "InvalidMap";
    case ErrorCode::GameFinished: return "GameFinished";
    case ErrorCode::MalformedAction: return "MalformedAction";
    case ErrorCode::NotOnRay: return "NotOnRay";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::OutOfCodebook: return "OutOfCodebook";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyEntitySet: return "EmptyEntitySet";
    case ErrorCode::DuplicatePosition: return "DuplicatePosition";
    case ErrorCode::EncodingMismatch: return "EncodingMismatch";
    case ErrorCode::NoTape: return "NoTape";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::CrcMismatch: return "CrcMismatch";
    case ErrorCode::ShapeHeaderMismatch: return "ShapeHeaderMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(EntityKind k) {
  switch (k) {
    case EntityKind::Impassable: return "impassable";
    case EntityKind::Empty: return "empty";
    case EntityKind::Agent: return "agent";
    case EntityKind::Player: return "player";
    case EntityKind::MeleeWeapon: return "melee";
    case EntityKind::RangedWeapon: return "ranged";
    case EntityKind::Potion: return "potion";
  }
  return "?";
}

std::string_view to_string(GameResult r) {
  switch (r) {
    case GameResult::Ongoing: return "Ongoing";
    case GameResult::AgentWin: return "AgentWin";
    case GameResult::AgentLoss: return "AgentLoss";
    case GameResult::Draw: return "Draw";
  }
  return "?";
}

std::string_view to_string(Event::Type t) {
  switch (t) {
    case Event::Type::Moved: return "Moved";
    case Event::Type::Bumped: return "Bumped";
    case Event::Type::MeleeHit: return "MeleeHit";
    case Event::Type::RangedHit: return "RangedHit";
    case Event::Type::RangedMiss: return "RangedMiss";
    case Event::Type::PickedUp: return "PickedUp";
    case Event::Type::DrankPotion: return "DrankPotion";
    case Event::Type::NoOp: return "NoOp";
  }
  return "?";
}

bool AttributeVector::within(int lo, int hi) const {
  const auto a = as_array();
  return std::all_of(a.begin(), a.end(), [&](int v) { return v >= lo && v <= hi; });
}

EntityKind GameState::kind_at(Position p) const {
  if (!in_bounds(p)) return EntityKind::Impassable;
  if (agent_.position == p) return EntityKind::Agent;
  if (player_.position == p) return EntityKind::Player;
  const Tile& t = tile(p);
  switch (t.kind) {
    case TileKind::Empty: return EntityKind::Empty;
    case TileKind::Impassable: return EntityKind::Impassable;
    case TileKind::Loot: return t.loot.kind;
  }
  return EntityKind::Impassable;
}

namespace {

int clamp_stat(int v, const EngineRules& rules) { return std::clamp(v, rules.stat_min, rules.stat_max); }

Actor make_actor(Role role, Position pos, const ActorConfig& cfg, const EngineRules& rules) {
  Actor a;
  a.role = role;
  a.position = pos;
  a.stats.max_hp = cfg.max_hp;
  a.stats.hp = std::clamp(cfg.hp, 0, cfg.max_hp);
  a.stats.atk = clamp_stat(cfg.atk, rules);
  a.stats.def = clamp_stat(cfg.def, rules);
  a.stats.dex = clamp_stat(cfg.dex, rules);
  a.melee_slot = cfg.melee;
  a.ranged_slot = cfg.ranged;
  a.potion_slot = cfg.potion;
  return a;
}

void check_config(const ActorConfig& cfg, const EngineRules& rules) {
  if (cfg.max_hp <= 0) throw Error(ErrorCode::InvalidMap, "actor max_hp must be positive");
  auto check_slot = [&](const std::optional<LootItem>& item, EntityKind expected) {
    if (!item) return;
    if (item->kind != expected) throw Error(ErrorCode::InvalidMap, "slot holds wrong loot kind");
    if (!item->bonuses.within(rules.attr_lo, rules.attr_hi)) throw Error(ErrorCode::InvalidMap, "slot bonuses out of range");
  };
  check_slot(cfg.melee, EntityKind::MeleeWeapon);
  check_slot(cfg.ranged, EntityKind::RangedWeapon);
  check_slot(cfg.potion, EntityKind::Potion);
}

int slot_bonus(const std::optional<LootItem>& slot, int AttributeVector::*field) {
  return slot ? slot->bonuses.*field : 0;
}

}  // namespace

ActorStats apply_bonuses(const ActorStats& stats, const AttributeVector& bonuses, const EngineRules& rules) {
  ActorStats out = stats;
  out.hp = std::clamp(stats.hp + bonuses.hp_bonus, 0, stats.max_hp);
  out.atk = clamp_stat(stats.atk + bonuses.atk_bonus, rules);
  out.def = clamp_stat(stats.def + bonuses.def_bonus, rules);
  out.dex = clamp_stat(stats.dex + bonuses.dex_bonus, rules);
  return out;
}

GameState new_game(const MapSpec& map, const ActorConfig& agent_cfg, const ActorConfig& player_cfg, std::uint64_t seed,
                   const EngineRules& rules) {
  if (map.width < 3 || map.height < 3 || map.width > kMaxSide || map.height > kMaxSide) {
    throw Error(ErrorCode::InvalidMap, "map sides must lie in [3, 10]");
  }
  GameState s;
  s.width_ = map.width;
  s.height_ = map.height;
  s.rules_ = rules;
  s.tiles_.assign(static_cast<std::size_t>(map.width * map.height), Tile{});

  auto occupied = [&](Position p) { return s.tiles_[s.index(p)].kind != TileKind::Empty; };
  for (const Position& p : map.impassable) {
    if (!s.in_bounds(p) || occupied(p)) throw Error(ErrorCode::InvalidMap, "impassable tile out of bounds or duplicated");
    s.tiles_[s.index(p)].kind = TileKind::Impassable;
  }
  for (const auto& [p, item] : map.loot) {
    if (!s.in_bounds(p) || occupied(p)) throw Error(ErrorCode::InvalidMap, "loot tile out of bounds or duplicated");
    if (!is_loot_kind(item.kind)) throw Error(ErrorCode::InvalidMap, "loot tile holds non-loot kind");
    if (!item.bonuses.within(rules.attr_lo, rules.attr_hi)) throw Error(ErrorCode::InvalidMap, "loot bonuses out of range");
    s.tiles_[s.index(p)] = Tile{TileKind::Loot, item};
  }
  if (!s.in_bounds(map.agent_spawn) || !s.in_bounds(map.player_spawn)) {
    throw Error(ErrorCode::InvalidMap, "spawn out of bounds");
  }
  if (map.agent_spawn == map.player_spawn) throw Error(ErrorCode::OverlappingSpawns, "agent and player share a spawn");
  if (occupied(map.agent_spawn) || occupied(map.player_spawn)) {
    throw Error(ErrorCode::InvalidMap, "spawn on impassable or loot tile");
  }
  check_config(agent_cfg, rules);
  check_config(player_cfg, rules);

  s.agent_ = make_actor(Role::Agent, map.agent_spawn, agent_cfg, rules);
  s.player_ = make_actor(Role::Player, map.player_spawn, player_cfg, rules);
  s.turn_ = 0;
  s.whose_turn_ = Role::Agent;
  s.result_ = GameResult::Ongoing;
  s.rng_ = Rng(derive_seed(seed, streams::kCombat));
  return s;
}

int melee_damage(const Actor& attacker, const Actor& defender) {
  const int attack = attacker.stats.atk + slot_bonus(attacker.melee_slot, &AttributeVector::atk_bonus);
  const int defense = defender.stats.def + slot_bonus(defender.melee_slot, &AttributeVector::def_bonus);
  return std::max(1, attack - defense);
}

int ranged_damage(const Actor& attacker, const Actor& defender) {
  const int attack = attacker.stats.atk + slot_bonus(attacker.ranged_slot, &AttributeVector::atk_bonus);
  return std::max(1, attack - defender.stats.def);
}

double ranged_hit_chance(const Actor& attacker, const Actor& defender) {
  const int dex_gap = attacker.stats.dex + slot_bonus(attacker.ranged_slot, &AttributeVector::dex_bonus) - defender.stats.dex;
  return std::clamp(0.5 + 0.05 * dex_gap, 0.1, 0.95);
}

Event ranged_attack(GameState& state, int direction) {
  GameStateEditor edit(state);
  Actor& shooter = edit.actor(state.whose_turn());
  Actor& target = edit.actor(other(state.whose_turn()));
  if (!shooter.ranged_slot) return Event{Event::Type::NoOp};

  const Position step = kDirections.at(static_cast<std::size_t>(direction));
  Position p = shooter.position + step;
  while (state.in_bounds(p) && state.kind_at(p) == EntityKind::Empty) p = p + step;
  if (!state.in_bounds(p) || p != target.position) return Event{Event::Type::NoOp};

  const double chance = ranged_hit_chance(shooter, target);
  if (edit.rng().uniform() >= chance) return Event{Event::Type::RangedMiss};
  const int dmg = ranged_damage(shooter, target);
  target.stats.hp = std::max(0, target.stats.hp - dmg);
  return Event{Event::Type::RangedHit, dmg};
}

bool line_of_sight(const GameState& state, Position from, Position to) {
  const int dx = to.x - from.x;
  const int dy = to.y - from.y;
  const bool on_ray = (dx != 0 || dy != 0) && (dx == 0 || dy == 0 || std::abs(dx) == std::abs(dy));
  if (!on_ray) throw Error(ErrorCode::NotOnRay, "target is not on a compass ray");
  const Position step{(dx > 0) - (dx < 0), (dy > 0) - (dy < 0)};
  for (Position p = from + step; p != to; p = p + step) {
    if (state.tile(p).kind == TileKind::Impassable) return false;
  }
  return true;
}

StepOutcome apply_action(GameState& s, int action) {
  if (s.result_ != GameResult::Ongoing) throw Error(ErrorCode::GameFinished, "no actions accepted after termination");
  if (action < 0 || action >= kNumActions) throw Error(ErrorCode::MalformedAction, "action " + std::to_string(action));

  StepOutcome out;
  out.actor = s.whose_turn_;
  Actor& self = s.mutable_actor(s.whose_turn_);
  Actor& opp = s.mutable_actor(other(s.whose_turn_));

  if (action < 8) {
    const Position target = self.position + kDirections[static_cast<std::size_t>(action)];
    if (!s.in_bounds(target) || s.tile(target).kind == TileKind::Impassable) {
      out.events.push_back({Event::Type::Bumped});
    } else if (target == opp.position) {
      const int dmg = melee_damage(self, opp);
      opp.stats.hp = std::max(0, opp.stats.hp - dmg);
      out.events.push_back({Event::Type::MeleeHit, dmg});
    } else {
      self.position = target;
      out.events.push_back({Event::Type::Moved});
      Tile& t = s.tiles_[s.index(target)];
      if (t.kind == TileKind::Loot) {
        const LootItem item = t.loot;
        switch (item.kind) {
          case EntityKind::MeleeWeapon: self.melee_slot = item; break;
          case EntityKind::RangedWeapon: self.ranged_slot = item; break;
          default: self.potion_slot = item; break;
        }
        t = Tile{};
        out.events.push_back({Event::Type::PickedUp, 0, item});
      }
    }
  } else if (action < 16) {
    out.events.push_back(ranged_attack(s, action - 8));
  } else if (self.potion_slot) {
    const LootItem potion = *self.potion_slot;
    self.stats = apply_bonuses(self.stats, potion.bonuses, s.rules_);
    self.potion_slot.reset();
    out.events.push_back({Event::Type::DrankPotion, 0, potion});
  } else {
    out.events.push_back({Event::Type::NoOp});
  }

  const bool acting_agent = s.whose_turn_ == Role::Agent;
  if (acting_agent) ++s.turn_;
  if (opp.stats.hp == 0) {
    s.result_ = acting_agent ? GameResult::AgentWin : GameResult::AgentLoss;
  } else if (self.stats.hp == 0) {
    s.result_ = acting_agent ? GameResult::AgentLoss : GameResult::AgentWin;
  } else if (acting_agent && s.turn_ >= s.rules_.max_steps) {
    s.result_ = GameResult::Draw;
  }
  s.whose_turn_ = other(s.whose_turn_);

  out.result = s.result_;
  out.done = s.result_ != GameResult::Ongoing;
  out.reward = s.result_ == GameResult::AgentWin ? 1.0 : 0.0;
  return out;
}

}  // namespace lootcrawl
