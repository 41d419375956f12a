#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "lootcrawl/policy.hpp"
#include "lootcrawl/procgen.hpp"

namespace lootcrawl::play {

using nlohmann::json;

struct Tally {
  int human_wins = 0;
  int agent_wins = 0;
  int draws = 0;
};

struct SessionOptions {
  std::filesystem::path checkpoint;
  LootDistributionSpec loot_spec;
  std::uint64_t seed = 0;
  NpcClass agent_class = NpcClass::Warrior;
  NpcClass human_class = NpcClass::Warrior;
  ActionMode action_mode = ActionMode::Greedy;
  CurriculumPhase phase = default_curriculum().back();
  int max_hp = 20;
};

/// One human (Player role) against a checkpointed agent (Agent role, moves
/// first). Not internally synchronized; SessionStore serializes access.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const Policy> agent, SessionOptions options);

  const std::string& id() const { return id_; }
  const GameState& game() const { return game_; }
  const Tally& tally() const { return tally_; }
  int episode() const { return episode_; }
  const SessionOptions& options() const { return options_; }

  struct Reply {
    std::vector<Event> human;
    std::vector<Event> agent;
  };

  /// Applies the human action then the agent's answer. Throws NotYourTurn,
  /// GameFinished or MalformedAction.
  Reply act(int action);
  /// Starts the next episode, optionally switching the loot distribution.
  void next_episode(const std::optional<LootDistributionSpec>& loot_spec);

  /// Agent events of the opening move of the current episode.
  const std::vector<Event>& opening_events() const { return opening_; }
  /// Human actions of the current episode, in order.
  const std::vector<int>& history() const { return history_; }

  /// Fresh episode `k` of these options, before the agent's opening move.
  static GameState initial_state(const SessionOptions& options, int episode);

 private:
  void start_episode();
  std::vector<Event> agent_move();
  void record_result();

  std::string id_;
  std::shared_ptr<const Policy> agent_;
  SessionOptions options_;
  GameState game_;
  Rng agent_rng_;
  Tally tally_;
  int episode_ = 0;
  std::vector<Event> opening_;
  std::vector<int> history_;
};

struct NotYourTurn : Error {
  NotYourTurn() : Error(ErrorCode::GameFinished, "it is not the human's turn") {}
};

json event_json(const Event& e);
json item_json(const std::optional<LootItem>& item);
/// Advisory per-action flags; the engine accepts every action regardless.
std::array<bool, kNumActions> legal_hint(const GameState& state, Role actor);
/// Full state message: grid padded to 10x10 with impassable cells.
json state_message(const Session& s);

/// Result of a store operation in HTTP terms.
struct Response {
  int status = 200;
  json body;
};

/// Thread-safe session registry with idle-time eviction and per-session
/// serialization. Subscribers receive every state message pushed after an
/// accepted action or a new episode.
class SessionStore {
 public:
  using Clock = std::chrono::steady_clock;
  using Subscriber = std::function<void(const std::string&)>;

  explicit SessionStore(std::chrono::seconds ttl = std::chrono::hours(1)) : ttl_(ttl) {}

  Response create(const json& request);
  Response get(const std::string& id);
  Response post_action(const std::string& id, const json& request);
  Response remove(const std::string& id);

  /// Returns a token for unsubscribe, or -1 when the session does not exist.
  long long subscribe(const std::string& id, Subscriber sink);
  void unsubscribe(const std::string& id, long long token);

  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t evict(Clock::time_point now = Clock::now());
  std::size_t size() const;

 private:
  struct Entry {
    std::mutex mu;
    std::unique_ptr<Session> session;
    Clock::time_point last_used;
    std::map<long long, Subscriber> subscribers;
  };

  std::shared_ptr<Entry> find(const std::string& id);
  std::shared_ptr<const Policy> policy_for(const std::filesystem::path& path);

  std::chrono::seconds ttl_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, std::shared_ptr<const Policy>> policies_;
  std::uint64_t next_id_ = 1;
  long long next_token_ = 1;
};

}  // namespace lootcrawl::play
