#include "lootcrawl/play/session.hpp"

#include <random>

#include "lootcrawl/arena.hpp"
#include "lootcrawl/config.hpp"

namespace lootcrawl::play {

Session::Session(std::string id, std::shared_ptr<const Policy> agent, SessionOptions options)
    : id_(std::move(id)), agent_(std::move(agent)), options_(std::move(options)) {
  start_episode();
}

GameState Session::initial_state(const SessionOptions& o, int episode) {
  const std::uint64_t base = derive_seed(o.seed, streams::kSession, static_cast<std::uint64_t>(episode));
  Rng map_rng(derive_seed(base, streams::kMap, 0));
  const MapSpec map = generate_map(o.phase, o.loot_spec, map_rng);
  ActorConfig agent = class_preset(o.agent_class, o.max_hp);
  ActorConfig human = class_preset(o.human_class, o.max_hp);
  neutral_equipment(agent);
  neutral_equipment(human);
  return new_game(map, agent, human, derive_seed(base, streams::kCombat, 0));
}

void Session::start_episode() {
  game_ = initial_state(options_, episode_);
  agent_rng_ = Rng(derive_seed(derive_seed(options_.seed, streams::kSession, static_cast<std::uint64_t>(episode_)), streams::kAgent, 0));
  history_.clear();
  opening_ = agent_move();
  record_result();
}

std::vector<Event> Session::agent_move() {
  if (game_.result() != GameResult::Ongoing || game_.whose_turn() != Role::Agent) return {};
  const int action = agent_->act(game_, Role::Agent, options_.action_mode, agent_rng_);
  return apply_action(game_, action).events;
}

void Session::record_result() {
  switch (game_.result()) {
    case GameResult::AgentWin: ++tally_.agent_wins; break;
    case GameResult::AgentLoss: ++tally_.human_wins; break;
    case GameResult::Draw: ++tally_.draws; break;
    case GameResult::Ongoing: break;
  }
}

Session::Reply Session::act(int action) {
  if (game_.result() != GameResult::Ongoing) throw Error(ErrorCode::GameFinished, "episode is over; request the next one");
  if (action < 0 || action >= kNumActions) throw Error(ErrorCode::MalformedAction, "action must be an integer in [0, 16]");
  if (game_.whose_turn() != Role::Player) throw NotYourTurn();
  Reply r;
  r.human = apply_action(game_, action).events;
  history_.push_back(action);
  r.agent = agent_move();
  record_result();
  return r;
}

void Session::next_episode(const std::optional<LootDistributionSpec>& loot_spec) {
  if (loot_spec) options_.loot_spec = *loot_spec;
  ++episode_;
  start_episode();
}

json item_json(const std::optional<LootItem>& item) {
  if (!item) return nullptr;
  return {{"kind", static_cast<int>(item->kind)}, {"bonuses", item->bonuses.as_array()}};
}

json event_json(const Event& e) {
  json j{{"type", to_string(e.type)}};
  if (e.type == Event::Type::MeleeHit || e.type == Event::Type::RangedHit) j["damage"] = e.damage;
  if (e.type == Event::Type::PickedUp || e.type == Event::Type::DrankPotion) j["item"] = item_json(e.item);
  return j;
}

std::array<bool, kNumActions> legal_hint(const GameState& s, Role actor) {
  std::array<bool, kNumActions> hint{};
  const Actor& me = s.actor(actor);
  const Actor& them = s.actor(other(actor));
  for (int d = 0; d < 8; ++d) {
    const Position step = kDirections[static_cast<std::size_t>(d)];
    const Position next = me.position + step;
    hint[static_cast<std::size_t>(d)] = s.in_bounds(next) && s.tile(next).kind != TileKind::Impassable;
    bool target = false;
    if (me.ranged_slot) {
      Position p = next;
      while (s.in_bounds(p) && s.kind_at(p) == EntityKind::Empty) p = p + step;
      target = s.in_bounds(p) && p == them.position;
    }
    hint[static_cast<std::size_t>(8 + d)] = target;
  }
  hint[16] = me.potion_slot.has_value();
  return hint;
}

namespace {

json actor_json(const Actor& a) {
  return {{"pos", {a.position.x, a.position.y}},
          {"stats", {{"hp", a.stats.hp}, {"max_hp", a.stats.max_hp}, {"atk", a.stats.atk}, {"def", a.stats.def}, {"dex", a.stats.dex}}},
          {"slots", {{"melee", item_json(a.melee_slot)}, {"ranged", item_json(a.ranged_slot)}, {"potion", item_json(a.potion_slot)}}}};
}

std::string role_name(Role r) { return r == Role::Agent ? "agent" : "player"; }

}  // namespace

json state_message(const Session& session) {
  const GameState& s = session.game();
  json cells = json::array();
  for (int y = 0; y < kMaxSide; ++y) {
    for (int x = 0; x < kMaxSide; ++x) {
      const Position p{x, y};
      if (!s.in_bounds(p)) {
        cells.push_back({{"kind", static_cast<int>(EntityKind::Impassable)}});
        continue;
      }
      const EntityKind kind = s.kind_at(p);
      json cell{{"kind", static_cast<int>(kind)}};
      if (is_loot_kind(kind)) cell["bonuses"] = s.tile(p).loot.bonuses.as_array();
      cells.push_back(std::move(cell));
    }
  }
  const auto hint = legal_hint(s, Role::Player);
  const Tally& t = session.tally();
  return {{"session_id", session.id()},
          {"episode", session.episode()},
          {"turn", s.turn()},
          {"whose_turn", role_name(s.whose_turn())},
          {"result", to_string(s.result())},
          {"grid", {{"width", kMaxSide}, {"height", kMaxSide}, {"map_width", s.width()}, {"map_height", s.height()}, {"cells", cells}}},
          {"player", actor_json(s.player())},
          {"agent", actor_json(s.agent())},
          {"legal_hint", hint},
          {"tally", {{"human_wins", t.human_wins}, {"agent_wins", t.agent_wins}, {"draws", t.draws}}}};
}

namespace {

Response error_response(int status, const std::string& code, const std::string& message) {
  return {status, {{"error", code}, {"message", message}}};
}

json events_json(const std::vector<Event>& events) {
  json out = json::array();
  for (const auto& e : events) out.push_back(event_json(e));
  return out;
}

}  // namespace

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<const Policy> SessionStore::policy_for(const std::filesystem::path& path) {
  const std::string key = std::filesystem::weakly_canonical(path).string();
  {
    std::lock_guard lock(mu_);
    if (auto it = policies_.find(key); it != policies_.end()) return it->second;
  }
  auto policy = std::make_shared<const Policy>(load_policy(path));
  std::lock_guard lock(mu_);
  return policies_.emplace(key, std::move(policy)).first->second;
}

Response SessionStore::create(const json& request) {
  evict();
  SessionOptions o;
  try {
    if (!request.is_object()) return error_response(400, "InvalidRequest", "request body must be a JSON object");
    if (!request.contains("checkpoint_path") || !request["checkpoint_path"].is_string()) {
      return error_response(400, "InvalidRequest", "checkpoint_path (string) is required");
    }
    o.checkpoint = request["checkpoint_path"].get<std::string>();
    if (request.contains("loot_spec")) o.loot_spec = config::loot_spec_from_json(request["loot_spec"]);
    if (request.contains("seed")) o.seed = request["seed"].get<std::uint64_t>();
    if (request.contains("agent_class")) o.agent_class = npc_class_from_string(request["agent_class"].get<std::string>());
    if (request.contains("human_class")) o.human_class = npc_class_from_string(request["human_class"].get<std::string>());
    if (request.contains("action_mode")) o.action_mode = action_mode_from_string(request["action_mode"].get<std::string>());
  } catch (const json::exception& e) {
    return error_response(400, "InvalidSpec", e.what());
  } catch (const Error& e) {
    return error_response(400, "InvalidSpec", e.what());
  }

  if (!std::filesystem::is_regular_file(o.checkpoint)) {
    return error_response(404, "CheckpointNotFound", "no checkpoint at " + o.checkpoint.string());
  }
  std::shared_ptr<const Policy> policy;
  try {
    policy = policy_for(o.checkpoint);
  } catch (const Error& e) {
    return error_response(400, "InvalidCheckpoint", e.what());
  }

  auto entry = std::make_shared<Entry>();
  std::string id;
  {
    std::lock_guard lock(mu_);
    static const std::uint64_t process_salt = std::random_device{}() ^ (std::uint64_t{std::random_device{}()} << 32);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(splitmix64(process_salt + next_id_++)));
    id = buf;
    entry->last_used = Clock::now();
    sessions_[id] = entry;
  }
  std::lock_guard lock(entry->mu);
  try {
    entry->session = std::make_unique<Session>(id, policy, o);
  } catch (const Error& e) {
    std::lock_guard g(mu_);
    sessions_.erase(id);
    return error_response(400, "InvalidSpec", e.what());
  }
  json body = state_message(*entry->session);
  return {201, {{"session_id", id}, {"agent_events", events_json(entry->session->opening_events())}, {"state", body}}};
}

Response SessionStore::get(const std::string& id) {
  auto entry = find(id);
  if (!entry) return error_response(404, "UnknownSession", "no session " + id);
  std::lock_guard lock(entry->mu);
  if (!entry->session) return error_response(404, "UnknownSession", "no session " + id);
  entry->last_used = Clock::now();
  return {200, state_message(*entry->session)};
}

Response SessionStore::post_action(const std::string& id, const json& request) {
  auto entry = find(id);
  if (!entry) return error_response(404, "UnknownSession", "no session " + id);
  std::lock_guard lock(entry->mu);
  if (!entry->session) return error_response(404, "UnknownSession", "no session " + id);
  entry->last_used = Clock::now();
  Session& s = *entry->session;

  Response out;
  if (request.is_object() && request.value("next", false) == true) {
    if (s.game().result() == GameResult::Ongoing) return error_response(409, "EpisodeOngoing", "the current episode has not finished");
    std::optional<LootDistributionSpec> spec;
    try {
      if (request.contains("loot_spec")) spec = config::loot_spec_from_json(request["loot_spec"]);
    } catch (const Error& e) {
      return error_response(400, "InvalidSpec", e.what());
    }
    s.next_episode(spec);
    out = {200, {{"human_events", json::array()}, {"agent_events", events_json(s.opening_events())}, {"state", state_message(s)}}};
  } else {
    if (!request.is_object() || !request.contains("action") || !request["action"].is_number_integer()) {
      return error_response(422, "MalformedAction", "body must be {\"action\": 0..16} or {\"next\": true}");
    }
    const auto action = request["action"].get<long long>();
    if (action < 0 || action >= kNumActions) return error_response(422, "MalformedAction", "action must be in [0, 16]");
    try {
      const auto reply = s.act(static_cast<int>(action));
      out = {200, {{"human_events", events_json(reply.human)}, {"agent_events", events_json(reply.agent)}, {"state", state_message(s)}}};
    } catch (const NotYourTurn& e) {
      return error_response(409, "NotYourTurn", e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::GameFinished) return error_response(409, "GameFinished", e.what());
      return error_response(422, "MalformedAction", e.what());
    }
  }
  const std::string message = out.body["state"].dump();
  for (auto& [token, sink] : entry->subscribers) sink(message);
  return out;
}

Response SessionStore::remove(const std::string& id) {
  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return error_response(404, "UnknownSession", "no session " + id);
    entry = it->second;
    sessions_.erase(it);
  }
  std::lock_guard lock(entry->mu);
  entry->session.reset();
  entry->subscribers.clear();
  return {204, nullptr};
}

long long SessionStore::subscribe(const std::string& id, Subscriber sink) {
  auto entry = find(id);
  if (!entry) return -1;
  std::lock_guard lock(entry->mu);
  if (!entry->session) return -1;
  long long token;
  {
    std::lock_guard g(mu_);
    token = next_token_++;
  }
  entry->subscribers.emplace(token, std::move(sink));
  return token;
}

void SessionStore::unsubscribe(const std::string& id, long long token) {
  auto entry = find(id);
  if (!entry) return;
  std::lock_guard lock(entry->mu);
  entry->subscribers.erase(token);
}

std::size_t SessionStore::evict(Clock::time_point now) {
  std::vector<std::shared_ptr<Entry>> dropped;
  {
    std::lock_guard lock(mu_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      std::unique_lock entry_lock(it->second->mu, std::try_to_lock);
      if (entry_lock.owns_lock() && now - it->second->last_used > ttl_) {
        dropped.push_back(it->second);
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& e : dropped) {
    std::lock_guard lock(e->mu);
    e->session.reset();
    e->subscribers.clear();
  }
  return dropped.size();
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace lootcrawl::play
