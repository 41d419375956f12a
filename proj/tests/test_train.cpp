#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lootcrawl/train.hpp"
#include "support.hpp"

namespace lootcrawl {
namespace {

TrainConfig tiny_train(nn::FrontendKind f = nn::FrontendKind::DenseEmbedding) {
  TrainConfig cfg;
  cfg.net = test::tiny_net(f);
  CurriculumPhase ph;
  ph.until_episode = 1000000;
  ph.map_side = {5, 5};
  ph.n_impassable = {0, 2};
  ph.n_loot = {{{1, 1}, {1, 1}, {1, 1}}};
  cfg.curriculum = {ph};
  cfg.max_steps = 30;
  cfg.total_episodes = 10;
  cfg.seed = 5;
  return cfg;
}

Transition step(float reward, bool done, float value = 0.0f) {
  Transition t;
  t.reward = reward;
  t.done = done;
  t.value = value;
  return t;
}

TEST(ComputeReturns, DiscountsWithinEpisodes) {
  const std::vector<Transition> b{step(0, false), step(0, false), step(1, true)};
  const Returns r = compute_returns(b, 0.99);
  EXPECT_NEAR(r.returns[0], 0.9801, 1e-12);
  EXPECT_NEAR(r.returns[1], 0.99, 1e-12);
  EXPECT_EQ(r.returns[2], 1.0);
}

TEST(ComputeReturns, ZeroRewardsGiveNegatedValues) {
  const std::vector<Transition> b{step(0, false, 0.25f), step(0, true, -0.5f)};
  const Returns r = compute_returns(b, 0.99);
  EXPECT_EQ(r.returns, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(r.advantages, (std::vector<double>{-0.25, 0.5}));
}

TEST(ComputeReturns, UndiscountedAndRestartedAtDone) {
  const std::vector<Transition> b{step(1, false), step(1, true), step(0, false), step(1, true)};
  const Returns r = compute_returns(b, 1.0);
  EXPECT_EQ(r.returns[0], 2.0);
  EXPECT_EQ(r.returns[2], 1.0);  // the first episode's reward does not leak into the second
}

TEST(CollectEpisodes, BoundsDoneFlagsAndDeterminism) {
  TrainConfig cfg = tiny_train();
  cfg.episodes_per_update = 5;
  const Learner l = Learner::fresh(cfg);
  const Batch b = collect_episodes(cfg, l.policy, l.critic, 0);
  ASSERT_EQ(b.episodes.size(), 5u);
  EXPECT_GE(b.transitions.size(), 5u);
  EXPECT_LE(b.transitions.size(), 5u * static_cast<std::size_t>(cfg.max_steps));
  int done = 0;
  for (const auto& t : b.transitions) {
    done += t.done;
    EXPECT_LE(t.log_prob, 0.0f);
    EXPECT_TRUE(t.reward == 0.0f || t.reward == 1.0f);
    EXPECT_GE(t.action, 0);
    EXPECT_LT(t.action, kNumActions);
  }
  EXPECT_EQ(done, 5);
  EXPECT_TRUE(b.transitions.back().done);
  int steps = 0;
  for (const auto& e : b.episodes) {
    EXPECT_NE(e.result, GameResult::Ongoing);
    EXPECT_EQ(e.total_reward, e.result == GameResult::AgentWin ? 1.0f : 0.0f);
    steps += e.agent_steps;
  }
  EXPECT_EQ(steps, static_cast<int>(b.transitions.size()));

  const Batch again = collect_episodes(cfg, l.policy, l.critic, 0);
  ASSERT_EQ(again.transitions.size(), b.transitions.size());
  for (std::size_t i = 0; i < b.transitions.size(); ++i) {
    EXPECT_EQ(again.transitions[i].action, b.transitions[i].action);
    EXPECT_EQ(again.transitions[i].log_prob, b.transitions[i].log_prob);
  }
}

TEST(TrainingEpisode, OpponentHpScaledByPhase) {
  TrainConfig cfg = tiny_train();
  cfg.curriculum[0].opponent_max_hp_scale = 0.5;
  cfg.random_equipment = false;
  const GameState s = training_episode(cfg, 3);
  EXPECT_EQ(s.actor(Role::Agent).stats.max_hp, 20);
  EXPECT_EQ(s.actor(Role::Player).stats.max_hp, 10);
  EXPECT_EQ(s.actor(Role::Player).stats.hp, 10);
  EXPECT_EQ(s.width(), 5);
}

TEST(PpoUpdate, FirstEpochRatiosAreOne) {
  for (nn::FrontendKind f : test::kAllFrontends) {
    TrainConfig cfg = tiny_train(f);
    Learner l = Learner::fresh(cfg);
    const Batch b = collect_episodes(cfg, l.policy, l.critic, 0);
    const UpdateStats s = ppo_update(l, b, cfg);
    ASSERT_EQ(s.epochs.size(), static_cast<std::size_t>(cfg.epochs_per_update));
    EXPECT_EQ(s.epochs[0].clip_fraction, 0.0) << nn::to_string(f);
    EXPECT_NEAR(s.epochs[0].approx_kl, 0.0, 1e-7) << nn::to_string(f);
    for (const auto& e : s.epochs) {
      EXPECT_GE(e.entropy, 0.0);
      EXPECT_LE(e.entropy, std::log(17.0) + 1e-9);
      EXPECT_GE(e.clip_fraction, 0.0);
      EXPECT_LE(e.clip_fraction, 1.0);
    }
  }
}

TEST(PpoUpdate, UniformPolicyHasMaximalEntropy) {
  TrainConfig cfg = tiny_train();
  Learner l = Learner::fresh(cfg);
  for (auto& v : l.policy["head.out.w"].data) v = 0.0f;
  const Batch b = collect_episodes(cfg, l.policy, l.critic, 0);
  EXPECT_NEAR(ppo_update(l, b, cfg).epochs[0].entropy, std::log(17.0), 1e-5);
}

TEST(PpoUpdate, EmptyBatchThrows) {
  TrainConfig cfg = tiny_train();
  Learner l = Learner::fresh(cfg);
  try {
    ppo_update(l, Batch{}, cfg);
    FAIL() << "expected EmptyBatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBatch);
  }
}

TEST(PpoUpdate, MovesParametersAndLeavesCriticSeparate) {
  TrainConfig cfg = tiny_train();
  cfg.lr_policy = 1e-2;
  Learner l = Learner::fresh(cfg);
  const auto before_policy = l.policy;
  const auto before_critic = l.critic;
  const Batch b = collect_episodes(cfg, l.policy, l.critic, 0);
  ppo_update(l, b, cfg);
  EXPECT_FALSE(l.policy == before_policy);
  EXPECT_FALSE(l.critic == before_critic);
  EXPECT_EQ(l.policy.size(), before_policy.size());
}

TEST(Train, CadenceMetricsAndCheckpoint) {
  const auto dir = std::filesystem::temp_directory_path() / "lootcrawl_train_test";
  std::filesystem::remove_all(dir);
  TrainConfig cfg = tiny_train();
  cfg.total_episodes = 25;
  cfg.episodes_per_update = 5;
  cfg.out_dir = dir;
  const TrainResult r = train(cfg);
  EXPECT_EQ(r.updates.size(), 5u);
  EXPECT_EQ(r.episodes.size(), 25u);
  ASSERT_TRUE(r.final_checkpoint.has_value());
  EXPECT_TRUE(std::filesystem::exists(*r.final_checkpoint));
  std::ifstream in(dir / "metrics.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], kMetricsHeader);
  EXPECT_EQ(std::count(lines[1].begin(), lines[1].end(), ','), 11);
  const nn::Checkpoint c = nn::load_checkpoint(*r.final_checkpoint);
  EXPECT_EQ(c.trained_episodes, 25);
  EXPECT_EQ(c.policy, r.learner.policy);
  std::filesystem::remove_all(dir);

  cfg.out_dir.reset();
  cfg.total_episodes = 12;
  EXPECT_EQ(train(cfg).updates.size(), 2u);  // floor(12 / 5)
}

TEST(Train, FixedSeedIsBitReproducible) {
  for (nn::FrontendKind f : test::kAllFrontends) {
    TrainConfig cfg = tiny_train(f);
    cfg.lr_policy = 1e-3;
    const TrainResult a = train(cfg), b = train(cfg);
    EXPECT_EQ(a.learner.policy, b.learner.policy) << nn::to_string(f);
    EXPECT_EQ(a.learner.critic, b.learner.critic);
    ASSERT_EQ(a.updates.size(), b.updates.size());
    for (std::size_t i = 0; i < a.updates.size(); ++i) {
      EXPECT_EQ(a.updates[i].stats.policy_loss, b.updates[i].stats.policy_loss);
      EXPECT_EQ(a.updates[i].stats.value_loss, b.updates[i].stats.value_loss);
    }
    cfg.seed = 6;
    EXPECT_FALSE(train(cfg).learner.policy == a.learner.policy);
  }
}

TEST(Train, AdamMinibatchRerunIgnoresHeapLayout) {
  TrainConfig cfg = tiny_train(nn::FrontendKind::Categorical);
  cfg.optimizer.kind = nn::OptimizerKind::Adam;
  cfg.minibatch_size = 8;
  cfg.lr_policy = 1e-3;
  const TrainResult a = train(cfg);
  std::vector<std::vector<char>> junk;
  for (std::size_t k = 1; k < 200; ++k) junk.emplace_back(k * 8 + 4);
  const TrainResult b = train(cfg);
  EXPECT_EQ(a.learner.policy, b.learner.policy);
  EXPECT_EQ(a.learner.critic, b.learner.critic);
}

TEST(Tensor, StorageIsCacheLineAligned) {
  for (int n : {1, 3, 17, 1000}) {
    const nn::Tensor<float> t({n});
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t.ptr()) % 64, 0u);
  }
}

TEST(Train, AdamMinibatchRunStaysFinite) {
  TrainConfig cfg = tiny_train(nn::FrontendKind::Transformer);
  cfg.optimizer.kind = nn::OptimizerKind::Adam;
  cfg.minibatch_size = 8;
  cfg.lr_policy = 1e-3;
  const TrainResult r = train(cfg);
  for (std::size_t i = 0; i < r.learner.policy.size(); ++i) EXPECT_TRUE(r.learner.policy.value(i).all_finite());
  for (const auto& u : r.updates) EXPECT_TRUE(std::isfinite(u.stats.policy_loss));
}

TEST(TrainConfig, ValidationRejectsBadValues) {
  EXPECT_NO_THROW(tiny_train().validate());
  auto bad = [](auto edit) {
    TrainConfig c = tiny_train();
    edit(c);
    try {
      c.validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::ConfigInvalid;
    }
    return false;
  };
  EXPECT_TRUE(bad([](TrainConfig& c) { c.gamma = 0.0; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.gamma = 1.01; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.clip_epsilon = 1.0; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.lr_policy = 0.0; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.episodes_per_update = 0; }));
  EXPECT_FALSE(bad([](TrainConfig& c) { c.gamma = 1.0; }));
}

TEST(TrailingWinRate, Window) {
  std::vector<EpisodeSummary> eps(10);
  for (int i = 0; i < 10; ++i) eps[static_cast<std::size_t>(i)].result = i >= 6 ? GameResult::AgentWin : GameResult::Draw;
  EXPECT_DOUBLE_EQ(trailing_win_rate(eps, 4), 1.0);
  EXPECT_DOUBLE_EQ(trailing_win_rate(eps, 8), 0.5);
  EXPECT_DOUBLE_EQ(trailing_win_rate(eps, 100), 0.4);
}

}  // namespace
}  // namespace lootcrawl
