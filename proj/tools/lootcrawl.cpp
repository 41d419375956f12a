// lootcrawl command-line entry point.
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lootcrawl/arena.hpp"
#include "lootcrawl/config.hpp"
#include "lootcrawl/play/server.hpp"
#include "lootcrawl/play/session.hpp"
#include "lootcrawl/train.hpp"

using namespace lootcrawl;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitRuntime = 4;

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string frontend;
  std::optional<long long> episodes;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_frontend) {
  cmd->add_option("--config", c.config, "Run configuration (JSON, see schemas/run_config.schema.json)");
  cmd->add_option("--seed", c.seed, "Master seed; overrides LOOTCRAWL_SEED and the config file");
  if (with_frontend) {
    cmd->add_option("--frontend", c.frontend, "State encoder")->check(CLI::IsMember({"categorical", "dense", "transformer"}));
  }
  cmd->add_option("--episodes", c.episodes, "Episode count override")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Output directory override");
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
}

/// Config file (or defaults), then LOOTCRAWL_SEED, then flags.
config::RunConfig resolve(const Common& c) {
  config::RunConfig rc = c.config.empty() ? config::parse_run_config({{"version", config::kRunConfigVersion}}) : config::load_run_config(c.config);
  if (const char* env = std::getenv("LOOTCRAWL_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      rc.train.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigInvalid, std::string("LOOTCRAWL_SEED is not an unsigned integer: ") + env);
    }
  }
  if (c.seed) rc.train.seed = *c.seed;
  if (!c.frontend.empty()) rc.train.net.frontend = nn::frontend_from_string(c.frontend);
  if (!c.out.empty()) rc.out_dir = c.out;
  return rc;
}

Policy load_existing(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw MissingArtifact("checkpoint not found: " + path.string());
  return load_policy(path);
}

int cmd_train(const Common& c) {
  config::RunConfig rc = resolve(c);
  if (c.episodes) rc.train.total_episodes = *c.episodes;
  rc.train.out_dir = rc.out_dir;
  rc.train.validate();
  if (!c.quiet) {
    std::cerr << "training " << to_string(rc.train.net.frontend) << " for " << rc.train.total_episodes << " episodes, seed "
              << rc.train.seed << ", output " << rc.out_dir.string() << '\n';
  }
  const TrainResult result = train(rc.train, [&](const UpdateRecord& u) {
    if (c.quiet || (u.update + 1) % 20 != 0) return;
    std::cerr << "episode " << u.episode << "  phase " << u.phase << "  win " << std::fixed << std::setprecision(2) << u.win_rate
              << "  draw " << u.draw_rate << "  entropy " << std::setprecision(3) << u.stats.entropy << '\n';
  });
  if (!c.quiet) {
    std::cerr << "done in " << std::fixed << std::setprecision(1) << result.wall_ms / 1000.0 << " s; trailing-100 win rate "
              << std::setprecision(3) << trailing_win_rate(result.episodes, 100) << '\n';
  }
  std::cout << result.final_checkpoint->string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, bool greedy) {
  config::RunConfig rc = resolve(c);
  const Policy policy = load_existing(checkpoint);
  TrainConfig t = rc.train;
  t.net = policy.net;
  const long long n = c.episodes.value_or(100);
  // evaluation plays the last curriculum phase
  const long long offset = t.curriculum.size() > 1 ? t.curriculum[t.curriculum.size() - 2].until_episode : 0;
  int wins = 0, draws = 0, losses = 0;
  for (long long i = 0; i < n; ++i) {
    GameState s = training_episode(t, offset + i);
    Rng agent_rng(derive_seed(t.seed, streams::kAgent, static_cast<std::uint64_t>(offset + i)));
    Rng opp_rng(derive_seed(t.seed, streams::kOpponent, static_cast<std::uint64_t>(offset + i)));
    while (s.result() == GameResult::Ongoing) {
      const int a = s.whose_turn() == Role::Agent ? policy.act(s, Role::Agent, greedy ? ActionMode::Greedy : ActionMode::Sample, agent_rng)
                                                  : static_cast<int>(opp_rng.index(kNumActions));
      apply_action(s, a);
    }
    wins += s.result() == GameResult::AgentWin;
    draws += s.result() == GameResult::Draw;
    losses += s.result() == GameResult::AgentLoss;
  }
  std::cout << "episodes " << n << "  wins " << wins << "  draws " << draws << "  losses " << losses << "  win_rate " << std::fixed
            << std::setprecision(3) << static_cast<double>(wins) / static_cast<double>(n) << '\n';
  return kExitOk;
}

int cmd_arena(const Common& c) {
  config::RunConfig rc = resolve(c);
  const config::ArenaPlan& plan = rc.arena;
  if (plan.pairings.empty()) throw Error(ErrorCode::ConfigInvalid, "arena.pairings is empty; nothing to evaluate");
  for (const auto& cls : plan.classes) {
    for (const auto& p : plan.pairings) {
      for (const auto& path : {config::substitute_class(p.a, cls), config::substitute_class(p.b, cls)}) {
        if (!fs::is_regular_file(path)) throw MissingArtifact("checkpoint not found: " + path);
      }
    }
  }
  ArenaReport report;
  for (auto cls : plan.classes) report.classes.emplace_back(to_string(cls));
  for (const auto& p : plan.pairings) report.pairings.push_back(p.name);
  for (const auto& d : plan.distributions) report.distributions.push_back(d.first);

  for (auto cls : plan.classes) {
    for (const auto& p : plan.pairings) {
      const Policy a = load_existing(config::substitute_class(p.a, cls));
      const Policy b = load_existing(config::substitute_class(p.b, cls));
      for (const auto& [dist_name, spec] : plan.distributions) {
        MatchSettings s;
        s.loot_spec = spec;
        s.n_episodes = static_cast<int>(c.episodes.value_or(plan.episodes));
        s.seed = rc.train.seed;
        s.action_mode = plan.action_mode;
        s.npc_class = cls;
        s.phase = rc.train.curriculum.back();
        s.max_hp = rc.train.max_hp;
        s.max_steps = rc.train.max_steps;
        const MatchResult r = run_match(a, b, s);
        report.cells.push_back({std::string(to_string(cls)), p.name, dist_name, r});
        if (!c.quiet) {
          std::cerr << to_string(cls) << " / " << p.name << " / " << dist_name << ": " << format_percent(r.success_rate_a) << '\n';
        }
      }
    }
  }
  fs::create_directories(rc.out_dir);
  std::ofstream(rc.out_dir / "arena_report.csv") << report_csv(report);
  std::ofstream(rc.out_dir / "arena_report.txt") << report_text(report);
  std::cout << report_text(report);
  return kExitOk;
}

int cmd_inspect(const std::string& checkpoint) {
  if (!fs::is_regular_file(checkpoint)) throw MissingArtifact("checkpoint not found: " + checkpoint);
  const nn::Checkpoint ck = nn::load_checkpoint(checkpoint);
  std::cout << "frontend          " << to_string(ck.net.frontend) << '\n'
            << "trained_episodes  " << ck.trained_episodes << '\n'
            << "seed              " << ck.seed << '\n'
            << "attr_range        [" << ck.net.attr_range.lo << ", " << ck.net.attr_range.hi << "]\n"
            << "n_heads           " << ck.net.n_heads << '\n'
            << "policy parameters " << ck.policy.parameter_count() << " (frontend " << ck.policy.parameter_count(nn::kFrontendPrefix) << ")\n"
            << "critic            " << (ck.critic ? std::to_string(ck.critic->parameter_count()) + " parameters" : "absent") << '\n'
            << "metadata          " << ck.metadata.dump() << '\n';
  for (std::size_t i = 0; i < ck.policy.size(); ++i) {
    std::cout << "  " << std::left << std::setw(32) << ck.policy.name(i) << nn::shape_string(ck.policy.value(i).shape) << '\n';
  }
  return kExitOk;
}

int cmd_bench(const Common& c) {
  config::RunConfig rc = resolve(c);
  const long long n = c.episodes.value_or(100);
  struct Row {
    std::string frontend;
    double seconds;
    long long episodes;
    long long agent_steps;
  };
  std::vector<Row> rows;
  for (auto f : {nn::FrontendKind::Transformer, nn::FrontendKind::DenseEmbedding, nn::FrontendKind::Categorical}) {
    TrainConfig t = rc.train;
    t.net.frontend = f;
    t.total_episodes = n;
    t.out_dir.reset();
    const TrainResult r = train(t);
    long long steps = 0;
    for (const auto& e : r.episodes) steps += e.agent_steps;
    rows.push_back({std::string(to_string(f)), r.wall_ms / 1000.0, static_cast<long long>(r.episodes.size()), steps});
    if (!c.quiet) std::cerr << to_string(f) << " done\n";
  }
  std::ostringstream csv;
  csv << "frontend,episodes,agent_steps,seconds,ms_per_step\n";
  std::cout << std::left << std::setw(12) << "frontend" << std::right << std::setw(10) << "episodes" << std::setw(12) << "steps"
            << std::setw(12) << "seconds" << std::setw(12) << "ms/step" << '\n';
  for (const auto& r : rows) {
    const double per = 1000.0 * r.seconds / static_cast<double>(std::max<long long>(1, r.agent_steps));
    csv << r.frontend << ',' << r.episodes << ',' << r.agent_steps << ',' << r.seconds << ',' << per << '\n';
    std::cout << std::left << std::setw(12) << r.frontend << std::right << std::setw(10) << r.episodes << std::setw(12) << r.agent_steps
              << std::setw(12) << std::fixed << std::setprecision(2) << r.seconds << std::setw(12) << std::setprecision(3) << per << '\n';
  }
  const bool ordered = rows[0].seconds > rows[1].seconds && rows[1].seconds >= rows[2].seconds;
  std::cout << "ordering transformer > dense >= categorical: " << (ordered ? "yes" : "no") << '\n';
  if (!c.out.empty() || !c.config.empty()) {
    fs::create_directories(rc.out_dir);
    std::ofstream(rc.out_dir / "bench.csv") << csv.str();
  }
  if (rows[0].seconds <= rows[1].seconds) {
    std::cerr << "bench: transformer was not slower than dense\n";
    return kExitRuntime;
  }
  return kExitOk;
}

play::Server* g_server = nullptr;

int cmd_serve(const std::string& address, unsigned short port, long long ttl_s, bool quiet) {
  play::Server server({address, port, std::chrono::seconds(ttl_s)});
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) std::thread([] { g_server->stop(); }).detach();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) std::thread([] { g_server->stop(); }).detach();
  });
  server.start();
  if (!quiet) std::cerr << "playserve listening on " << address << ':' << server.port() << '\n';
  std::cout << server.port() << std::endl;
  server.wait();
  g_server = nullptr;
  return kExitOk;
}

// ---- terminal play -------------------------------------------------------------

char glyph(const GameState& s, Position p) {
  switch (s.kind_at(p)) {
    case EntityKind::Impassable: return '#';
    case EntityKind::Empty: return '.';
    case EntityKind::Agent: return 'A';
    case EntityKind::Player: return '@';
    case EntityKind::MeleeWeapon: return 'm';
    case EntityKind::RangedWeapon: return 'r';
    case EntityKind::Potion: return '!';
  }
  return '?';
}

std::string slot_text(const std::optional<LootItem>& item) {
  if (!item) return "-";
  const auto b = item->bonuses.as_array();
  std::ostringstream os;
  os << std::showpos << '[' << b[0] << ',' << b[1] << ',' << b[2] << ',' << b[3] << ']';
  return os.str();
}

void render(const play::Session& session, std::ostream& os) {
  const GameState& s = session.game();
  os << "\nepisode " << session.episode() << "  turn " << s.turn() << "/" << s.rules().max_steps << "  result " << to_string(s.result()) << '\n';
  for (int y = 0; y < s.height(); ++y) {
    os << "  ";
    for (int x = 0; x < s.width(); ++x) os << glyph(s, {x, y});
    os << '\n';
  }
  for (Role r : {Role::Player, Role::Agent}) {
    const Actor& a = s.actor(r);
    os << (r == Role::Player ? "  you   " : "  agent ") << "hp " << a.stats.hp << "/" << a.stats.max_hp << " atk " << a.stats.atk << " def "
       << a.stats.def << " dex " << a.stats.dex << "  melee " << slot_text(a.melee_slot) << " ranged " << slot_text(a.ranged_slot)
       << " potion " << slot_text(a.potion_slot) << '\n';
  }
}

constexpr const char* kPlayHelp =
    "keys: q w e / a d / z x c move or melee (NW N NE / W E / SW S SE); prefix f to shoot (e.g. fw);\n"
    "      p drinks the held potion; n starts the next episode once one ends; ? help; quit exits";

std::optional<int> parse_key(const std::string& key) {
  static const std::string dirs = "wedcxzaq";  // N NE E SE S SW W NW
  if (key == "p") return 16;
  if (key.size() == 1 && dirs.find(key[0]) != std::string::npos) return static_cast<int>(dirs.find(key[0]));
  if (key.size() == 2 && key[0] == 'f' && dirs.find(key[1]) != std::string::npos) return 8 + static_cast<int>(dirs.find(key[1]));
  return std::nullopt;
}

int cmd_play(const std::string& checkpoint, const std::string& loot, std::uint64_t seed, const std::string& cls) {
  if (!fs::is_regular_file(checkpoint)) throw MissingArtifact("checkpoint not found: " + checkpoint);
  play::SessionOptions o;
  o.checkpoint = checkpoint;
  o.seed = seed;
  o.agent_class = o.human_class = npc_class_from_string(cls);
  if (fs::is_regular_file(loot)) {
    std::ifstream in(loot);
    o.loot_spec = config::loot_spec_from_json(nlohmann::json::parse(in));
  } else {
    o.loot_spec = LootDistributionSpec::preset(loot);
  }
  auto policy = std::make_shared<const Policy>(load_policy(checkpoint));
  play::Session session("terminal", policy, o);
  std::cout << kPlayHelp << '\n';
  render(session, std::cout);
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    std::istringstream is(line);
    std::string key;
    if (!(is >> key)) continue;
    if (key == "quit" || key == "Q") break;
    if (key == "?") {
      std::cout << kPlayHelp << '\n';
      continue;
    }
    if (key == "n") {
      if (session.game().result() == GameResult::Ongoing) {
        std::cout << "the episode is still running\n";
        continue;
      }
      session.next_episode(std::nullopt);
      render(session, std::cout);
      continue;
    }
    const auto action = parse_key(key);
    if (!action) {
      std::cout << "unknown key '" << key << "'. " << kPlayHelp << '\n';
      continue;
    }
    if (session.game().result() != GameResult::Ongoing) {
      std::cout << "episode over; n starts the next one\n";
      continue;
    }
    const auto reply = session.act(*action);
    for (const auto& e : reply.human) std::cout << "  you: " << play::event_json(e).dump() << '\n';
    for (const auto& e : reply.agent) std::cout << "  agent: " << play::event_json(e).dump() << '\n';
    render(session, std::cout);
    if (session.game().result() != GameResult::Ongoing) {
      const GameResult r = session.game().result();
      std::cout << (r == GameResult::Draw ? "Draw" : r == GameResult::AgentLoss ? "You win" : "Agent wins") << ". n for the next episode\n";
    }
  }
  const auto& t = session.tally();
  std::cout << "tally: you " << t.human_wins << "  agent " << t.agent_wins << "  draws " << t.draws << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lootcrawl: train and evaluate gridworld NPC policies with procedural loot"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, arena_opts, bench_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a policy with PPO");
  add_common(train_cmd, train_opts, true);

  auto* eval_cmd = app.add_subcommand("evaluate", "Win rate of a checkpoint against the random-move opponent");
  add_common(eval_cmd, eval_opts, false);
  std::string eval_ckpt;
  bool eval_greedy = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate")->required();
  eval_cmd->add_flag("--greedy", eval_greedy, "Argmax actions instead of sampling");

  auto* arena_cmd = app.add_subcommand("arena", "Run the pairing x distribution x class arena matrix");
  add_common(arena_cmd, arena_opts, false);

  auto* inspect_cmd = app.add_subcommand("inspect", "Print a checkpoint's header and parameter layout");
  std::string inspect_ckpt;
  inspect_cmd->add_option("--checkpoint", inspect_ckpt, "Checkpoint file")->required();

  auto* bench_cmd = app.add_subcommand("bench", "Time training episodes for every frontend");
  add_common(bench_cmd, bench_opts, false);

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP/WebSocket play service");
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  long long ttl = 3600;
  bool serve_quiet = false;
  serve_cmd->add_option("--address", address, "Listen address");
  serve_cmd->add_option("--port", port, "Listen port (0 picks a free one)");
  serve_cmd->add_option("--ttl", ttl, "Idle session lifetime in seconds")->check(CLI::PositiveNumber);
  serve_cmd->add_flag("--quiet", serve_quiet, "Suppress the startup banner");

  auto* play_cmd = app.add_subcommand("play", "Play the Player role in the terminal against a checkpoint");
  std::string play_ckpt, play_loot = "procedural", play_class = "warrior";
  std::uint64_t play_seed = 0;
  play_cmd->add_option("--checkpoint", play_ckpt, "Agent checkpoint")->required();
  play_cmd->add_option("--loot", play_loot, "Loot preset (procedural|uniform|skewed) or a loot-spec JSON file");
  play_cmd->add_option("--seed", play_seed, "Session seed");
  play_cmd->add_option("--class", play_class, "Class of both actors")->check(CLI::IsMember({"archer", "warrior", "ranger"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*eval_cmd) return cmd_evaluate(eval_opts, eval_ckpt, eval_greedy);
    if (*arena_cmd) return cmd_arena(arena_opts);
    if (*inspect_cmd) return cmd_inspect(inspect_ckpt);
    if (*bench_cmd) return cmd_bench(bench_opts);
    if (*serve_cmd) return cmd_serve(address, port, ttl, serve_quiet);
    if (*play_cmd) return cmd_play(play_ckpt, play_loot, play_seed, play_class);
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::ConfigInvalid:
      case ErrorCode::InvalidSpec:
        return kExitConfig;
      case ErrorCode::Io:
        return kExitMissing;
      default:
        return kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
