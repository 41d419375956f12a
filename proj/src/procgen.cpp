#include "lootcrawl/procgen.hpp"

#include <cmath>
#include <numeric>
#include <queue>

namespace lootcrawl {

namespace {

std::vector<LootTemplate> tiered(const std::array<int, 3>& levels) {
  std::vector<LootTemplate> out;
  for (EntityKind kind : {EntityKind::MeleeWeapon, EntityKind::RangedWeapon}) {
    for (int v : levels) out.push_back({LootItem{kind, AttributeVector::uniform(v)}, 1.0});
  }
  return out;
}

}  // namespace

void LootDistributionSpec::validate() const {
  if (const auto* p = std::get_if<ProceduralLoot>(&dist)) {
    if (p->attr_lo > p->attr_hi) throw Error(ErrorCode::InvalidSpec, "procedural attr_lo > attr_hi");
    return;
  }
  const auto& set = std::get<FixedSetLoot>(dist);
  if (set.templates.empty()) throw Error(ErrorCode::InvalidSpec, "fixed set needs at least one template");
  for (const auto& t : set.templates) {
    if (!std::isfinite(t.weight) || t.weight <= 0.0) throw Error(ErrorCode::InvalidSpec, "template weights must be finite and positive");
    if (!is_loot_kind(t.item.kind)) throw Error(ErrorCode::InvalidSpec, "template kind must be a loot kind");
  }
  if (set.fallback && set.fallback->attr_lo > set.fallback->attr_hi) {
    throw Error(ErrorCode::InvalidSpec, "fallback attr_lo > attr_hi");
  }
}

LootDistributionSpec LootDistributionSpec::uniform_preset() {
  // Template order high, medium, low.
  return {FixedSetLoot{tiered({2, 0, -2}), ProceduralLoot{}}};
}

LootDistributionSpec LootDistributionSpec::skewed_preset() {
  return {FixedSetLoot{tiered({5, -2, -3}), ProceduralLoot{}}};
}

LootDistributionSpec LootDistributionSpec::preset(const std::string& name) {
  if (name == "procedural") return procedural();
  if (name == "uniform") return uniform_preset();
  if (name == "skewed") return skewed_preset();
  throw Error(ErrorCode::InvalidSpec, "unknown loot preset '" + name + "'");
}

const LootTemplate* pick_template(const FixedSetLoot& set, EntityKind kind, double u) {
  double total = 0.0;
  for (const auto& t : set.templates) {
    if (t.item.kind == kind) total += t.weight;
  }
  if (total <= 0.0) return nullptr;
  const LootTemplate* last = nullptr;
  double cumulative = 0.0;
  for (const auto& t : set.templates) {
    if (t.item.kind != kind) continue;
    cumulative += t.weight / total;
    last = &t;
    if (u < cumulative) return &t;
  }
  return last;  // rounding left u >= final cumulative sum
}

LootItem sample_loot(const LootDistributionSpec& spec, EntityKind kind, Rng& rng) {
  auto procedural = [&](const ProceduralLoot& p) {
    LootItem item{kind, {}};
    item.bonuses.hp_bonus = rng.uniform_int(p.attr_lo, p.attr_hi);
    item.bonuses.atk_bonus = rng.uniform_int(p.attr_lo, p.attr_hi);
    item.bonuses.def_bonus = rng.uniform_int(p.attr_lo, p.attr_hi);
    item.bonuses.dex_bonus = rng.uniform_int(p.attr_lo, p.attr_hi);
    return item;
  };
  if (const auto* p = std::get_if<ProceduralLoot>(&spec.dist)) return procedural(*p);

  const auto& set = std::get<FixedSetLoot>(spec.dist);
  if (const LootTemplate* t = pick_template(set, kind, rng.uniform())) return t->item;
  if (set.fallback) return procedural(*set.fallback);
  throw Error(ErrorCode::InvalidSpec, "fixed set has no template for " + std::string(to_string(kind)));
}

void CurriculumPhase::validate() const {
  auto nonempty = [](const IntRange& r) { return r.min <= r.max && r.min >= 0; };
  if (!nonempty(map_side) || map_side.min < 3 || map_side.max > kMaxSide) {
    throw Error(ErrorCode::InvalidSpec, "map side range must lie in [3, 10]");
  }
  if (!nonempty(n_impassable)) throw Error(ErrorCode::InvalidSpec, "bad impassable range");
  for (const auto& r : n_loot) {
    if (!nonempty(r)) throw Error(ErrorCode::InvalidSpec, "bad loot range");
  }
  if (!(opponent_max_hp_scale > 0.0 && opponent_max_hp_scale <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "opponent_max_hp_scale must lie in (0, 1]");
  }
}

Curriculum default_curriculum() {
  return {
      CurriculumPhase{10'000, {5, 7}, {0, 2}, {{{1, 1}, {1, 1}, {1, 1}}}, 0.5},
      CurriculumPhase{30'000, {6, 9}, {0, 4}, {{{1, 2}, {1, 2}, {1, 2}}}, 0.75},
      CurriculumPhase{1'000'000'000, {8, 10}, {0, 6}, {{{1, 3}, {1, 3}, {1, 3}}}, 1.0},
  };
}

std::size_t phase_index_for_episode(const Curriculum& curriculum, long long episode) {
  if (curriculum.empty()) throw Error(ErrorCode::InvalidSpec, "empty curriculum");
  for (std::size_t i = 0; i < curriculum.size(); ++i) {
    if (episode < curriculum[i].until_episode) return i;
  }
  return curriculum.size() - 1;
}

const CurriculumPhase& phase_for_episode(const Curriculum& curriculum, long long episode) {
  return curriculum[phase_index_for_episode(curriculum, episode)];
}

bool spawns_connected(const MapSpec& map) {
  const int w = map.width;
  const int h = map.height;
  std::vector<char> blocked(static_cast<std::size_t>(w * h), 0);
  for (const Position& p : map.impassable) blocked[static_cast<std::size_t>(p.y * w + p.x)] = 1;
  std::vector<char> seen(blocked.size(), 0);
  std::queue<Position> frontier;
  frontier.push(map.agent_spawn);
  seen[static_cast<std::size_t>(map.agent_spawn.y * w + map.agent_spawn.x)] = 1;
  constexpr std::array<Position, 4> kSteps{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
  while (!frontier.empty()) {
    const Position p = frontier.front();
    frontier.pop();
    if (p == map.player_spawn) return true;
    for (const Position& d : kSteps) {
      const Position q = p + d;
      if (q.x < 0 || q.y < 0 || q.x >= w || q.y >= h) continue;
      const auto i = static_cast<std::size_t>(q.y * w + q.x);
      if (blocked[i] || seen[i]) continue;
      seen[i] = 1;
      frontier.push(q);
    }
  }
  return false;
}

MapSpec generate_map(const CurriculumPhase& phase, const LootDistributionSpec& loot_spec, Rng& rng) {
  phase.validate();
  loot_spec.validate();
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    MapSpec map;
    map.width = rng.uniform_int(phase.map_side.min, phase.map_side.max);
    map.height = rng.uniform_int(phase.map_side.min, phase.map_side.max);
    const int n_impassable = rng.uniform_int(phase.n_impassable.min, phase.n_impassable.max);
    std::array<int, 3> n_loot{};
    for (std::size_t k = 0; k < 3; ++k) n_loot[k] = rng.uniform_int(phase.n_loot[k].min, phase.n_loot[k].max);

    const int cells = map.width * map.height;
    const int needed = n_impassable + n_loot[0] + n_loot[1] + n_loot[2] + 2;
    if (needed > cells) continue;

    // Partial Fisher-Yates: the first `needed` cells become the placements.
    std::vector<int> order(static_cast<std::size_t>(cells));
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < needed; ++i) {
      const int j = i + static_cast<int>(rng.index(static_cast<std::size_t>(cells - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    auto pos = [&](int i) {
      const int c = order[static_cast<std::size_t>(i)];
      return Position{c % map.width, c / map.width};
    };
    int next = 0;
    for (int i = 0; i < n_impassable; ++i) map.impassable.push_back(pos(next++));
    for (int k = 0; k < 3; ++k) {
      for (int i = 0; i < n_loot[static_cast<std::size_t>(k)]; ++i) {
        const Position p = pos(next++);
        map.loot.emplace_back(p, sample_loot(loot_spec, loot_kind_at(k), rng));
      }
    }
    map.agent_spawn = pos(next++);
    map.player_spawn = pos(next++);
    if (spawns_connected(map)) return map;
  }
  throw Error(ErrorCode::GenerationFailed, "no feasible map after " + std::to_string(kMaxGenerationAttempts) + " samples");
}

std::string_view to_string(NpcClass c) {
  switch (c) {
    case NpcClass::Archer: return "archer";
    case NpcClass::Warrior: return "warrior";
    case NpcClass::Ranger: return "ranger";
  }
  return "?";
}

NpcClass npc_class_from_string(const std::string& name) {
  if (name == "archer") return NpcClass::Archer;
  if (name == "warrior") return NpcClass::Warrior;
  if (name == "ranger") return NpcClass::Ranger;
  throw Error(ErrorCode::InvalidSpec, "unknown class '" + name + "'");
}

ActorConfig class_preset(NpcClass c, int max_hp) {
  ActorConfig cfg;
  cfg.max_hp = max_hp;
  cfg.hp = max_hp;
  switch (c) {
    case NpcClass::Archer:  // dex-heavy
      cfg.atk = 5, cfg.def = 2, cfg.dex = 8;
      break;
    case NpcClass::Warrior:  // atk/def-heavy
      cfg.atk = 7, cfg.def = 4, cfg.dex = 2;
      break;
    case NpcClass::Ranger:
      cfg.atk = 6, cfg.def = 3, cfg.dex = 5;
      break;
  }
  return cfg;
}

LootItem neutral_weapon(EntityKind kind) { return LootItem{kind, AttributeVector{}}; }

void randomize_equipment(ActorConfig& cfg, const LootDistributionSpec& spec, Rng& rng) {
  cfg.melee.reset();
  cfg.ranged.reset();
  cfg.potion.reset();
  if (rng.uniform() < 0.5) cfg.melee = sample_loot(spec, EntityKind::MeleeWeapon, rng);
  if (rng.uniform() < 0.5) cfg.ranged = sample_loot(spec, EntityKind::RangedWeapon, rng);
}

void neutral_equipment(ActorConfig& cfg) {
  cfg.hp = cfg.max_hp;
  cfg.melee = neutral_weapon(EntityKind::MeleeWeapon);
  cfg.ranged = neutral_weapon(EntityKind::RangedWeapon);
  cfg.potion.reset();
}

}  // namespace lootcrawl
