#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lootcrawl/policy.hpp"
#include "lootcrawl/procgen.hpp"

namespace lootcrawl {

/// Episode conditions shared by every arena game.
struct MatchSettings {
  LootDistributionSpec loot_spec;
  int n_episodes = 100;
  std::uint64_t seed = 0;
  ActionMode action_mode = ActionMode::Sample;
  NpcClass npc_class = NpcClass::Warrior;
  CurriculumPhase phase = default_curriculum().back();
  int max_hp = 20;
  int max_steps = 100;

  /// Throws ConfigInvalid.
  void validate() const;
};

struct MatchConfig {
  std::filesystem::path checkpoint_a;
  std::filesystem::path checkpoint_b;
  MatchSettings settings;
};

struct MatchResult {
  int wins_a = 0;
  int wins_b = 0;
  int draws = 0;
  double success_rate_a = 0.0;  ///< (wins_a + draws / 2) / episodes
  int a_moved_first = 0;

  int episodes() const { return wins_a + wins_b + draws; }
  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Both actors start at full HP with neutral weapons on a final-phase map.
/// A plays the first-moving side in even episodes and the second in odd ones.
MatchResult run_match(const Policy& a, const Policy& b, const MatchSettings& settings);
/// Loads both checkpoints (Io / format errors propagate).
MatchResult run_match(const MatchConfig& config);

Policy load_policy(const std::filesystem::path& checkpoint);

/// Two-sided exact binomial test of H0: p = 0.5 given k successes out of n.
double binomial_two_sided_p(int k, int n);

/// Integer percent, exact halves rounded down: 0.665 -> "66%".
std::string format_percent(double rate);

struct ReportCell {
  std::string npc_class;
  std::string pairing;
  std::string distribution;
  MatchResult result;
};

struct ArenaReport {
  std::vector<std::string> classes;
  std::vector<std::string> pairings;
  std::vector<std::string> distributions;
  std::vector<ReportCell> cells;

  /// Throws MissingCell.
  const ReportCell& at(const std::string& npc_class, const std::string& pairing, const std::string& distribution) const;
};

inline constexpr const char* kReportHeader = "class,pairing,distribution,wins_a,wins_b,draws,success_rate_a";

/// One row per class x pairing x distribution, in axis order. Throws MissingCell.
std::string report_csv(const ArenaReport& report);
/// Aligned grid: a row per class and pairing, a column per distribution.
std::string report_text(const ArenaReport& report);

}  // namespace lootcrawl
