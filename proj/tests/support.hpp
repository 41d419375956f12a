#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "lootcrawl/engine.hpp"
#include "lootcrawl/nn/network.hpp"
#include "lootcrawl/procgen.hpp"

namespace lootcrawl::test {

inline ActorConfig plain_actor(int atk = 5, int def = 3, int dex = 5, int hp = 20) {
  ActorConfig c;
  c.max_hp = hp;
  c.hp = hp;
  c.atk = atk;
  c.def = def;
  c.dex = dex;
  return c;
}

inline MapSpec open_map(int w, int h, Position agent, Position player) {
  MapSpec m;
  m.width = w;
  m.height = h;
  m.agent_spawn = agent;
  m.player_spawn = player;
  return m;
}

inline GameState open_game(int w, int h, Position agent, Position player, const ActorConfig& a = plain_actor(),
                           const ActorConfig& p = plain_actor(), std::uint64_t seed = 1, EngineRules rules = {}) {
  return new_game(open_map(w, h, agent, player), a, p, seed, rules);
}

inline LootItem item(EntityKind kind, int hp, int atk, int def, int dex) { return LootItem{kind, AttributeVector{hp, atk, def, dex}}; }

/// Narrow network used where speed matters more than capacity.
inline nn::NetConfig tiny_net(nn::FrontendKind f) {
  nn::NetConfig c;
  c.frontend = f;
  c.embed_dim = 4;
  c.conv_filters = 3;
  c.fc_hidden = 8;
  c.property_embed = 3;
  c.property_hidden = 5;
  c.d_model = 6;
  c.head_dim = 4;
  c.attention_mlp_hidden = 7;
  c.entity_hidden = 5;
  return c;
}

inline constexpr nn::FrontendKind kAllFrontends[] = {nn::FrontendKind::Categorical, nn::FrontendKind::DenseEmbedding,
                                                      nn::FrontendKind::Transformer};

/// Breadth-first search over non-impassable tiles, written against MapSpec only.
inline bool bfs_connected(const MapSpec& m) {
  std::vector<char> blocked(static_cast<std::size_t>(m.width * m.height), 0);
  for (const auto& p : m.impassable) blocked[static_cast<std::size_t>(p.y * m.width + p.x)] = 1;
  std::vector<char> seen(blocked.size(), 0);
  std::deque<Position> q{m.agent_spawn};
  seen[static_cast<std::size_t>(m.agent_spawn.y * m.width + m.agent_spawn.x)] = 1;
  while (!q.empty()) {
    const Position p = q.front();
    q.pop_front();
    if (p == m.player_spawn) return true;
    const Position steps[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : steps) {
      const Position n{p.x + d.x, p.y + d.y};
      if (n.x < 0 || n.y < 0 || n.x >= m.width || n.y >= m.height) continue;
      const auto i = static_cast<std::size_t>(n.y * m.width + n.x);
      if (blocked[i] || seen[i]) continue;
      seen[i] = 1;
      q.push_back(n);
    }
  }
  return false;
}

struct FuzzReport {
  long long episodes = 0;
  long long steps = 0;
  long long violations = 0;
  std::vector<std::string> first_messages;

  void fail(const std::string& msg) {
    ++violations;
    if (first_messages.size() < 10) first_messages.push_back(msg);
  }
};

inline int clamp_int(int v, int lo, int hi) { return std::max(lo, std::min(hi, v)); }

/// Random-action episodes on curriculum maps with every engine invariant checked
/// against values recomputed here from the pre-step state.
inline FuzzReport fuzz_engine(long long episodes, std::uint64_t seed) {
  FuzzReport rep;
  const Curriculum cur = default_curriculum();
  const LootDistributionSpec spec = LootDistributionSpec::procedural(-5, 5);
  Rng rng(seed);
  for (long long e = 0; e < episodes; ++e) {
    const CurriculumPhase& phase = cur[static_cast<std::size_t>(e) % cur.size()];
    const MapSpec map = generate_map(phase, spec, rng);
    if (!bfs_connected(map)) rep.fail("generated map without spawn path");
    ActorConfig a = class_preset(static_cast<NpcClass>(e % 3), 3 + static_cast<int>(e % 18));
    ActorConfig p = class_preset(static_cast<NpcClass>((e / 3) % 3), 3 + static_cast<int>((e / 7) % 18));
    randomize_equipment(a, spec, rng);
    randomize_equipment(p, spec, rng);
    if (rng.uniform() < 0.5) a.potion = sample_loot(spec, EntityKind::Potion, rng);
    EngineRules rules;
    rules.max_steps = 1 + static_cast<int>(rng.index(100));
    GameState s = new_game(map, a, p, rng.next_u64(), rules);
    const int loot_at_start = static_cast<int>(map.loot.size());
    int picked = 0;
    double total_reward = 0.0;
    std::vector<int> actions;
    const GameState initial = s;

    while (s.result() == GameResult::Ongoing) {
      const GameState before = s;
      const Role actor = s.whose_turn();
      const int action = static_cast<int>(rng.index(kNumActions));
      actions.push_back(action);
      StepOutcome out;
      try {
        out = apply_action(s, action);
      } catch (const Error& err) {
        rep.fail(std::string("apply_action threw on an ongoing state: ") + err.what());
        break;
      }
      ++rep.steps;
      total_reward += out.reward;

      if (s.whose_turn() != other(actor)) rep.fail("whose_turn did not alternate");
      const int expected_turn = before.turn() + (actor == Role::Agent ? 1 : 0);
      if (s.turn() != expected_turn) rep.fail("turn counter out of step");
      if (out.reward != 0.0 && s.result() != GameResult::AgentWin) rep.fail("reward outside AgentWin");
      if (s.result() == GameResult::AgentWin && out.reward != 1.0) rep.fail("win without +1");
      if (out.done != (s.result() != GameResult::Ongoing)) rep.fail("done flag disagrees with result");
      if (s.result() == GameResult::Draw && s.turn() != rules.max_steps) rep.fail("draw away from max_steps");
      if (s.result() == GameResult::Ongoing && s.turn() >= rules.max_steps) rep.fail("ongoing past max_steps");

      for (Role r : {Role::Agent, Role::Player}) {
        const Actor& act = s.actor(r);
        if (act.stats.hp < 0 || act.stats.hp > act.stats.max_hp) rep.fail("hp outside [0, max_hp]");
        if (act.stats.atk < 0 || act.stats.def < 0 || act.stats.dex < 0) rep.fail("negative stat");
        if (!s.in_bounds(act.position)) rep.fail("actor out of bounds");
        else if (s.tile(act.position).kind != TileKind::Empty) rep.fail("actor on impassable or loot tile");
        if (act.melee_slot && act.melee_slot->kind != EntityKind::MeleeWeapon) rep.fail("melee slot kind");
        if (act.ranged_slot && act.ranged_slot->kind != EntityKind::RangedWeapon) rep.fail("ranged slot kind");
        if (act.potion_slot && act.potion_slot->kind != EntityKind::Potion) rep.fail("potion slot kind");
      }
      if (s.agent().position == s.player().position) rep.fail("actors share a tile");

      const Actor& self_before = before.actor(actor);
      const Actor& self_after = s.actor(actor);
      const Actor& opp_before = before.actor(other(actor));
      const Actor& opp_after = s.actor(other(actor));
      for (const Event& ev : out.events) {
        if (ev.type == Event::Type::PickedUp) {
          ++picked;
          const Tile& was = before.tile(self_after.position);
          if (was.kind != TileKind::Loot || !(was.loot == ev.item)) rep.fail("pickup item differs from the tile");
          const std::optional<LootItem>& slot = ev.item.kind == EntityKind::MeleeWeapon    ? self_after.melee_slot
                                                : ev.item.kind == EntityKind::RangedWeapon ? self_after.ranged_slot
                                                                                           : self_after.potion_slot;
          if (!slot || !(*slot == ev.item)) rep.fail("picked item not in its slot");
          if (!(self_after.stats == self_before.stats)) rep.fail("pickup changed stats");
        } else if (ev.type == Event::Type::DrankPotion) {
          const AttributeVector& b = self_before.potion_slot->bonuses;
          ActorStats want = self_before.stats;
          want.hp = clamp_int(want.hp + b.hp_bonus, 0, want.max_hp);
          want.atk = clamp_int(want.atk + b.atk_bonus, rules.stat_min, rules.stat_max);
          want.def = clamp_int(want.def + b.def_bonus, rules.stat_min, rules.stat_max);
          want.dex = clamp_int(want.dex + b.dex_bonus, rules.stat_min, rules.stat_max);
          if (!(self_after.stats == want)) rep.fail("potion stats differ from clamp(before + bonuses)");
          if (self_after.potion_slot) rep.fail("potion not consumed");
        } else if (ev.type == Event::Type::MeleeHit) {
          const int atk = self_before.stats.atk + (self_before.melee_slot ? self_before.melee_slot->bonuses.atk_bonus : 0);
          const int def = opp_before.stats.def + (opp_before.melee_slot ? opp_before.melee_slot->bonuses.def_bonus : 0);
          const int dmg = std::max(1, atk - def);
          if (ev.damage != dmg) rep.fail("melee damage differs from the formula");
          if (opp_after.stats.hp != std::max(0, opp_before.stats.hp - dmg)) rep.fail("melee hp bookkeeping");
        }
      }
    }
    if (s.result() == GameResult::Ongoing) continue;
    const int loot_left = static_cast<int>(std::count_if(s.tiles().begin(), s.tiles().end(),
                                                         [](const Tile& t) { return t.kind == TileKind::Loot; }));
    if (loot_left + picked != loot_at_start) rep.fail("loot not conserved");
    if (total_reward != (s.result() == GameResult::AgentWin ? 1.0 : 0.0)) rep.fail("episode reward not in {0, 1} by result");

    GameState replay = initial;
    for (int act : actions) apply_action(replay, act);
    if (!(replay == s)) rep.fail("replay of the action sequence diverged");
    ++rep.episodes;
  }
  return rep;
}

}  // namespace lootcrawl::test
