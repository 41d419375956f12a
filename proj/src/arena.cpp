#include "lootcrawl/arena.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "lootcrawl/nn/checkpoint.hpp"

namespace lootcrawl {

void MatchSettings::validate() const {
  if (n_episodes <= 0) throw Error(ErrorCode::ConfigInvalid, "n_episodes must be positive");
  if (max_hp < 1 || max_steps < 1) throw Error(ErrorCode::ConfigInvalid, "max_hp and max_steps must be positive");
  try {
    loot_spec.validate();
    phase.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
}

MatchResult run_match(const Policy& a, const Policy& b, const MatchSettings& s) {
  s.validate();
  MatchResult r;
  EngineRules rules;
  rules.max_steps = s.max_steps;
  for (int i = 0; i < s.n_episodes; ++i) {
    const auto e = static_cast<std::uint64_t>(i);
    Rng map_rng(derive_seed(s.seed, streams::kMap, e));
    const MapSpec map = generate_map(s.phase, s.loot_spec, map_rng);
    ActorConfig actor = class_preset(s.npc_class, s.max_hp);
    neutral_equipment(actor);
    GameState state = new_game(map, actor, actor, derive_seed(s.seed, streams::kCombat, e), rules);

    // the engine's Agent role always moves first
    const Role role_a = i % 2 == 0 ? Role::Agent : Role::Player;
    r.a_moved_first += role_a == Role::Agent;
    Rng rng_a(derive_seed(s.seed, streams::kAgent, e));
    Rng rng_b(derive_seed(s.seed, streams::kOpponent, e));
    while (state.result() == GameResult::Ongoing) {
      const Role mover = state.whose_turn();
      const int action = mover == role_a ? a.act(state, mover, s.action_mode, rng_a) : b.act(state, mover, s.action_mode, rng_b);
      apply_action(state, action);
    }
    if (state.result() == GameResult::Draw) {
      ++r.draws;
    } else {
      const Role winner = state.result() == GameResult::AgentWin ? Role::Agent : Role::Player;
      (winner == role_a ? r.wins_a : r.wins_b) += 1;
    }
  }
  r.success_rate_a = (r.wins_a + 0.5 * r.draws) / static_cast<double>(s.n_episodes);
  return r;
}

Policy load_policy(const std::filesystem::path& checkpoint) {
  nn::Checkpoint c = nn::load_checkpoint(checkpoint);
  return Policy{c.net, std::move(c.policy)};
}

MatchResult run_match(const MatchConfig& config) {
  const Policy a = load_policy(config.checkpoint_a);
  const Policy b = config.checkpoint_b == config.checkpoint_a ? a : load_policy(config.checkpoint_b);
  return run_match(a, b, config.settings);
}

double binomial_two_sided_p(int k, int n) {
  if (n <= 0) return 1.0;
  // P(X = j) under p = 1/2 via log-gamma; sum all outcomes no more likely than k
  auto log_pmf = [n](int j) { return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) - n * std::log(2.0); };
  const double observed = log_pmf(k);
  double p = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double lj = log_pmf(j);
    if (lj <= observed + 1e-9) p += std::exp(lj);
  }
  return std::min(1.0, p);
}

std::string format_percent(double rate) {
  const double x = rate * 100.0;
  const auto pct = static_cast<long long>(std::ceil(x - 0.5 - 1e-9));
  return std::to_string(pct) + "%";
}

const ReportCell& ArenaReport::at(const std::string& npc_class, const std::string& pairing, const std::string& distribution) const {
  for (const auto& c : cells) {
    if (c.npc_class == npc_class && c.pairing == pairing && c.distribution == distribution) return c;
  }
  throw Error(ErrorCode::MissingCell, "no result for " + npc_class + " / " + pairing + " / " + distribution);
}

std::string report_csv(const ArenaReport& report) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const auto& cls : report.classes) {
    for (const auto& pairing : report.pairings) {
      for (const auto& dist : report.distributions) {
        const MatchResult& r = report.at(cls, pairing, dist).result;
        os << cls << ',' << pairing << ',' << dist << ',' << r.wins_a << ',' << r.wins_b << ',' << r.draws << ','
           << std::setprecision(6) << r.success_rate_a << '\n';
      }
    }
  }
  return os.str();
}

std::string report_text(const ArenaReport& report) {
  std::size_t w0 = std::string("class").size();
  std::size_t w1 = std::string("pairing").size();
  for (const auto& c : report.classes) w0 = std::max(w0, c.size());
  for (const auto& p : report.pairings) w1 = std::max(w1, p.size());
  std::vector<std::size_t> wd;
  for (const auto& d : report.distributions) wd.push_back(std::max<std::size_t>(d.size(), 4));

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w0)) << "class" << "  " << std::setw(static_cast<int>(w1)) << "pairing";
  for (std::size_t j = 0; j < report.distributions.size(); ++j) {
    os << "  " << std::right << std::setw(static_cast<int>(wd[j])) << report.distributions[j];
  }
  os << '\n';
  for (const auto& cls : report.classes) {
    for (const auto& pairing : report.pairings) {
      os << std::left << std::setw(static_cast<int>(w0)) << cls << "  " << std::setw(static_cast<int>(w1)) << pairing;
      for (std::size_t j = 0; j < report.distributions.size(); ++j) {
        os << "  " << std::right << std::setw(static_cast<int>(wd[j]))
           << format_percent(report.at(cls, pairing, report.distributions[j]).result.success_rate_a);
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace lootcrawl
