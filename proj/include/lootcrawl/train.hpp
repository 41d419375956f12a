#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "lootcrawl/nn/checkpoint.hpp"
#include "lootcrawl/nn/optimizer.hpp"
#include "lootcrawl/policy.hpp"
#include "lootcrawl/procgen.hpp"

namespace lootcrawl {

struct TrainConfig {
  double lr_policy = 5e-6;
  double lr_baseline = 5e-4;
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  int episodes_per_update = 5;
  int max_steps = 100;
  int epochs_per_update = 3;
  int minibatch_size = 0;  ///< 0 = one full-batch step per epoch
  double entropy_coef = 0.01;
  long long total_episodes = 1000;
  Curriculum curriculum = default_curriculum();
  LootDistributionSpec loot_spec;
  nn::NetConfig net;
  std::uint64_t seed = 0;

  NpcClass agent_class = NpcClass::Warrior;
  NpcClass opponent_class = NpcClass::Warrior;
  int max_hp = 20;
  bool random_equipment = true;
  nn::OptimizerConfig optimizer;

  std::optional<std::filesystem::path> out_dir;  ///< metrics.csv and checkpoints; nothing written when empty
  long long checkpoint_interval = 0;             ///< in episodes; 0 writes only the final checkpoint

  /// Throws ConfigInvalid.
  void validate() const;
};

struct Transition {
  Observation observation;
  int action = 0;
  float log_prob = 0.0f;
  float reward = 0.0f;
  bool done = false;
  float value = 0.0f;
};

struct EpisodeSummary {
  long long episode = 0;
  GameResult result = GameResult::Ongoing;
  int turns = 0;
  int agent_steps = 0;
  float total_reward = 0.0f;
};

/// Episode-contiguous transitions.
struct Batch {
  std::vector<Transition> transitions;
  std::vector<EpisodeSummary> episodes;
};

/// Episode `e` as training sees it: curriculum phase map, class stats, the
/// opponent's max HP scaled by the phase, optional random starting weapons.
GameState training_episode(const TrainConfig& cfg, long long episode);

Batch collect_episodes(const TrainConfig& cfg, const nn::ParamStore<float>& policy, const nn::ParamStore<float>& critic,
                       long long first_episode);

struct Returns {
  std::vector<double> returns;
  std::vector<double> advantages;  ///< return minus recorded value, before normalization
};

/// Discounted Monte-Carlo returns restarted at every done flag.
Returns compute_returns(std::span<const Transition> batch, double gamma);

struct EpochStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct UpdateStats {
  double policy_loss = 0.0;  ///< last epoch, averaged over its samples
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double mean_return = 0.0;
  std::vector<EpochStats> epochs;
};

/// Policy and critic parameters with their optimizer state.
struct Learner {
  nn::NetConfig net;
  nn::ParamStore<float> policy;
  nn::ParamStore<float> critic;
  nn::Optimizer policy_opt;
  nn::Optimizer critic_opt;

  static Learner fresh(const TrainConfig& cfg);
};

/// Throws EmptyBatch.
UpdateStats ppo_update(Learner& learner, const Batch& batch, const TrainConfig& cfg);

struct UpdateRecord {
  long long update = 0;
  long long episode = 0;  ///< episodes completed after this update
  std::size_t phase = 0;
  double mean_return = 0.0;
  double win_rate = 0.0;
  double draw_rate = 0.0;
  double avg_steps = 0.0;
  UpdateStats stats;
  double wall_ms = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "update,episode,phase,mean_return,win_rate,draw_rate,avg_steps,policy_loss,value_loss,entropy,clip_fraction,wall_ms";

std::string metrics_row(const UpdateRecord& r);

struct TrainResult {
  Learner learner;
  std::vector<EpisodeSummary> episodes;
  std::vector<UpdateRecord> updates;
  std::optional<std::filesystem::path> final_checkpoint;
  double wall_ms = 0.0;
};

nn::Checkpoint make_checkpoint(const Learner& learner, const TrainConfig& cfg, long long trained_episodes);

/// floor(total_episodes / episodes_per_update) collect/update rounds; one metrics
/// row per round, periodic checkpoints and a final one when out_dir is set.
TrainResult train(const TrainConfig& cfg, const std::function<void(const UpdateRecord&)>& on_update = {});

/// Fraction of AgentWin among the last `window` episodes (all if fewer).
double trailing_win_rate(std::span<const EpisodeSummary> episodes, std::size_t window);

}  // namespace lootcrawl
