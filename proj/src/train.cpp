#include "lootcrawl/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace lootcrawl {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); };
  if (!(lr_policy > 0.0) || !(lr_baseline > 0.0)) fail("learning rates must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon must lie in (0, 1)");
  if (episodes_per_update < 1) fail("episodes_per_update must be at least 1");
  if (epochs_per_update < 1) fail("epochs_per_update must be at least 1");
  if (minibatch_size < 0) fail("minibatch_size must be non-negative");
  if (max_steps < 1) fail("max_steps must be at least 1");
  if (entropy_coef < 0.0) fail("entropy_coef must be non-negative");
  if (total_episodes < 0) fail("total_episodes must be non-negative");
  if (max_hp < 1) fail("max_hp must be positive");
  if (checkpoint_interval < 0) fail("checkpoint_interval must be non-negative");
  if (curriculum.empty()) fail("curriculum needs at least one phase");
  for (std::size_t i = 0; i < curriculum.size(); ++i) {
    try {
      curriculum[i].validate();
    } catch (const Error& e) {
      fail("curriculum phase " + std::to_string(i) + ": " + e.what());
    }
    if (i > 0 && curriculum[i].until_episode <= curriculum[i - 1].until_episode) fail("curriculum thresholds must increase");
  }
  try {
    loot_spec.validate();
  } catch (const Error& e) {
    fail(std::string("loot spec: ") + e.what());
  }
}

GameState training_episode(const TrainConfig& cfg, long long episode) {
  const auto e = static_cast<std::uint64_t>(episode);
  const CurriculumPhase& phase = phase_for_episode(cfg.curriculum, episode);
  Rng map_rng(derive_seed(cfg.seed, streams::kMap, e));
  const MapSpec map = generate_map(phase, cfg.loot_spec, map_rng);

  ActorConfig agent = class_preset(cfg.agent_class, cfg.max_hp);
  const int opponent_hp = std::max(1, static_cast<int>(std::lround(cfg.max_hp * phase.opponent_max_hp_scale)));
  ActorConfig player = class_preset(cfg.opponent_class, opponent_hp);
  if (cfg.random_equipment) {
    Rng equip(derive_seed(cfg.seed, streams::kEquip, e));
    randomize_equipment(agent, cfg.loot_spec, equip);
    randomize_equipment(player, cfg.loot_spec, equip);
  }
  EngineRules rules;
  rules.max_steps = cfg.max_steps;
  return new_game(map, agent, player, derive_seed(cfg.seed, streams::kCombat, e), rules);
}

Batch collect_episodes(const TrainConfig& cfg, const nn::ParamStore<float>& policy, const nn::ParamStore<float>& critic,
                       long long first_episode) {
  Batch batch;
  for (int k = 0; k < cfg.episodes_per_update; ++k) {
    const long long episode = first_episode + k;
    const auto e = static_cast<std::uint64_t>(episode);
    GameState state = training_episode(cfg, episode);
    Rng agent_rng(derive_seed(cfg.seed, streams::kAgent, e));
    Rng opponent_rng(derive_seed(cfg.seed, streams::kOpponent, e));

    EpisodeSummary summary;
    summary.episode = episode;
    const std::size_t start = batch.transitions.size();
    while (state.result() == GameResult::Ongoing) {
      if (state.whose_turn() == Role::Agent) {
        Transition t;
        t.observation = observe_for(cfg.net, state, Role::Agent);
        const auto logits = nn::forward_policy(cfg.net, policy, t.observation);
        t.action = sample_action(logits, agent_rng);
        t.log_prob = nn::log_softmax<float>(logits)[static_cast<std::size_t>(t.action)];
        t.value = nn::forward_value(cfg.net, critic, t.observation);
        const StepOutcome out = apply_action(state, t.action);
        t.reward = static_cast<float>(out.reward);
        t.done = out.done;
        batch.transitions.push_back(std::move(t));
        ++summary.agent_steps;
      } else {
        const auto action = static_cast<int>(opponent_rng.index(kNumActions));
        const StepOutcome out = apply_action(state, action);
        // the opponent can end the game (e.g. a harmful potion); credit it to the agent's last step
        if (batch.transitions.size() > start) {
          batch.transitions.back().reward += static_cast<float>(out.reward);
          batch.transitions.back().done = batch.transitions.back().done || out.done;
        }
      }
    }
    summary.result = state.result();
    summary.turns = state.turn();
    for (std::size_t i = start; i < batch.transitions.size(); ++i) summary.total_reward += batch.transitions[i].reward;
    batch.episodes.push_back(summary);
  }
  return batch;
}

Returns compute_returns(std::span<const Transition> batch, double gamma) {
  Returns r;
  r.returns.resize(batch.size());
  r.advantages.resize(batch.size());
  double g = 0.0;
  for (std::size_t i = batch.size(); i-- > 0;) {
    if (batch[i].done) g = 0.0;
    g = batch[i].reward + gamma * g;
    r.returns[i] = g;
    r.advantages[i] = g - batch[i].value;
  }
  return r;
}

Learner Learner::fresh(const TrainConfig& cfg) {
  Learner l;
  l.net = cfg.net;
  l.policy = nn::init_params<float>(cfg.net, cfg.seed);
  l.critic = nn::init_params<float>(nn::critic_config(cfg.net), derive_seed(cfg.seed, streams::kInit, 1));
  l.policy_opt = nn::Optimizer(cfg.optimizer);
  l.critic_opt = nn::Optimizer(cfg.optimizer);
  return l;
}

UpdateStats ppo_update(Learner& learner, const Batch& batch, const TrainConfig& cfg) {
  const auto& data = batch.transitions;
  if (data.empty()) throw Error(ErrorCode::EmptyBatch, "ppo_update on an empty batch");
  const std::size_t n = data.size();
  const Returns ret = compute_returns(data, cfg.gamma);

  std::vector<double> adv = ret.advantages;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);

  const nn::NetConfig critic_net = nn::critic_config(learner.net);
  const auto eps = static_cast<float>(cfg.clip_epsilon);
  const auto beta = static_cast<float>(cfg.entropy_coef);
  const std::size_t mb = cfg.minibatch_size > 0 ? std::min<std::size_t>(n, static_cast<std::size_t>(cfg.minibatch_size)) : n;
  const auto inv_n = 1.0 / static_cast<double>(n);

  UpdateStats stats;
  for (const auto& ep : batch.episodes) stats.mean_return += ep.total_reward;
  stats.mean_return /= static_cast<double>(std::max<std::size_t>(1, batch.episodes.size()));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(cfg.seed, streams::kAgent, static_cast<std::uint64_t>(learner.policy_opt.steps()) | (1ull << 62)));

  nn::Gradients<float> pg(learner.policy);
  nn::Gradients<float> vg(learner.critic);
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    EpochStats es;
    std::size_t clipped = 0;
    if (mb < n) {
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i)))]);
    }
    for (std::size_t lo = 0; lo < n; lo += mb) {
      const std::size_t hi = std::min(n, lo + mb);
      const auto weight = static_cast<float>(1.0 / static_cast<double>(hi - lo));
      pg.zero();
      vg.zero();
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = order[k];
        const Transition& t = data[i];
        {
          nn::Tape<float> tape(learner.policy, &pg);
          const nn::Var logits = nn::forward(tape, learner.net, t.observation);
          const nn::Var loss = tape.ppo_objective(logits, t.action, t.log_prob, static_cast<float>(adv[i]), eps, beta, weight);
          tape.backward(loss);

          const auto logp = nn::log_softmax<float>(tape.value(logits).data);
          double entropy = 0.0;
          for (float lp : logp) entropy -= std::exp(static_cast<double>(lp)) * lp;
          const double log_ratio = static_cast<double>(logp[static_cast<std::size_t>(t.action)]) - t.log_prob;
          if (std::abs(std::exp(log_ratio) - 1.0) > cfg.clip_epsilon) ++clipped;
          es.policy_loss += tape.value(loss)[0] / weight * inv_n;
          es.entropy += entropy * inv_n;
          es.approx_kl -= log_ratio * inv_n;
        }
        {
          nn::Tape<float> tape(learner.critic, &vg);
          const nn::Var v = nn::forward(tape, critic_net, t.observation);
          const nn::Var loss = tape.squared_error(v, static_cast<float>(ret.returns[i]), weight);
          tape.backward(loss);
          es.value_loss += tape.value(loss)[0] / weight * inv_n;
        }
      }
      learner.policy_opt.step(learner.policy, pg, cfg.lr_policy);
      learner.critic_opt.step(learner.critic, vg, cfg.lr_baseline);
    }
    es.clip_fraction = static_cast<double>(clipped) * inv_n;
    stats.epochs.push_back(es);
  }
  const EpochStats& last = stats.epochs.back();
  stats.policy_loss = last.policy_loss;
  stats.value_loss = last.value_loss;
  stats.entropy = last.entropy;
  stats.approx_kl = last.approx_kl;
  stats.clip_fraction = last.clip_fraction;
  return stats;
}

std::string metrics_row(const UpdateRecord& r) {
  std::ostringstream os;
  os << std::setprecision(9) << r.update << ',' << r.episode << ',' << r.phase << ',' << r.mean_return << ',' << r.win_rate << ','
     << r.draw_rate << ',' << r.avg_steps << ',' << r.stats.policy_loss << ',' << r.stats.value_loss << ',' << r.stats.entropy << ','
     << r.stats.clip_fraction << ',' << std::setprecision(6) << r.wall_ms;
  return os.str();
}

nn::Checkpoint make_checkpoint(const Learner& learner, const TrainConfig& cfg, long long trained_episodes) {
  nn::Checkpoint c;
  c.net = learner.net;
  c.policy = learner.policy;
  c.critic = learner.critic;
  c.trained_episodes = trained_episodes;
  c.seed = cfg.seed;
  c.metadata = {{"agent_class", to_string(cfg.agent_class)}, {"optimizer", to_string(cfg.optimizer.kind)}};
  return c;
}

TrainResult train(const TrainConfig& cfg, const std::function<void(const UpdateRecord&)>& on_update) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  TrainResult result{Learner::fresh(cfg), {}, {}, std::nullopt, 0.0};
  std::ofstream metrics;
  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    metrics.open(*cfg.out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics) throw Error(ErrorCode::Io, "cannot write metrics file in " + cfg.out_dir->string());
    metrics << kMetricsHeader << '\n';
  }

  const long long updates = cfg.total_episodes / cfg.episodes_per_update;
  long long next_checkpoint = cfg.checkpoint_interval;
  for (long long u = 0; u < updates; ++u) {
    const auto u0 = clock::now();
    const long long first = u * cfg.episodes_per_update;
    const Batch batch = collect_episodes(cfg, result.learner.policy, result.learner.critic, first);
    UpdateRecord rec;
    rec.stats = ppo_update(result.learner, batch, cfg);
    rec.update = u;
    rec.episode = first + cfg.episodes_per_update;
    rec.phase = phase_index_for_episode(cfg.curriculum, first);
    double wins = 0, draws = 0, steps = 0;
    for (const auto& ep : batch.episodes) {
      wins += ep.result == GameResult::AgentWin;
      draws += ep.result == GameResult::Draw;
      steps += ep.turns;
    }
    const auto k = static_cast<double>(batch.episodes.size());
    rec.mean_return = rec.stats.mean_return;
    rec.win_rate = wins / k;
    rec.draw_rate = draws / k;
    rec.avg_steps = steps / k;
    rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - u0).count();
    result.episodes.insert(result.episodes.end(), batch.episodes.begin(), batch.episodes.end());
    result.updates.push_back(rec);
    if (metrics.is_open()) metrics << metrics_row(rec) << '\n' << std::flush;
    if (on_update) on_update(rec);

    if (cfg.out_dir && cfg.checkpoint_interval > 0 && rec.episode >= next_checkpoint && u + 1 < updates) {
      nn::save_checkpoint(make_checkpoint(result.learner, cfg, rec.episode),
                          *cfg.out_dir / ("checkpoint_" + std::to_string(rec.episode) + ".adnc"));
      while (next_checkpoint <= rec.episode) next_checkpoint += cfg.checkpoint_interval;
    }
  }
  if (cfg.out_dir) {
    const auto path = *cfg.out_dir / "final.adnc";
    nn::save_checkpoint(make_checkpoint(result.learner, cfg, updates * cfg.episodes_per_update), path);
    result.final_checkpoint = path;
  }
  result.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return result;
}

double trailing_win_rate(std::span<const EpisodeSummary> episodes, std::size_t window) {
  if (episodes.empty()) return 0.0;
  const std::size_t k = std::min(window, episodes.size());
  std::size_t wins = 0;
  for (std::size_t i = episodes.size() - k; i < episodes.size(); ++i) wins += episodes[i].result == GameResult::AgentWin;
  return static_cast<double>(wins) / static_cast<double>(k);
}

}  // namespace lootcrawl
