#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lootcrawl/nn/checkpoint.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "lootcrawl_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the CLI with `args` through the shell; `env` is prepended verbatim.
CliRun run(const std::string& args, const std::string& env = "", const std::string& stdin_text = "") {
  const fs::path err = scratch() / "stderr.txt";
  const fs::path in = scratch() / "stdin.txt";
  std::ofstream(in) << stdin_text;
  const std::string cmd = "env -u LOOTCRAWL_SEED " + env + " " + LOOTCRAWL_CLI + " " + args + " <" + in.string() + " 2>" + err.string();
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

/// Small network and short episodes so every command finishes in seconds.
fs::path tiny_config(const std::string& name, const std::string& extra = "") {
  const fs::path p = scratch() / (name + ".json");
  std::ofstream(p) << R"({"version": 1, "seed": 3, "frontend": "dense",
    "engine": {"max_steps": 20},
    "network": {"embed_dim": 4, "conv_filters": 3, "fc_hidden": 8, "property_embed": 3, "property_hidden": 5,
                "d_model": 6, "head_dim": 4, "attention_mlp_hidden": 7, "entity_hidden": 5},
    "train": {"total_episodes": 10},
    "curriculum": [{"until_episode": 1000000, "map_side": [5, 5], "n_impassable": [0, 1],
                    "n_loot": {"melee": [1, 1], "ranged": [1, 1], "potion": [1, 1]}}],
    "output": {"dir": ")" + (scratch() / name).string() + "\"}" + extra + "}";
  return p;
}

lootcrawl::nn::Checkpoint trained(const std::string& name, const std::string& args, const std::string& env = "") {
  const CliRun r = run("train --quiet --config " + tiny_config(name).string() + " " + args, env);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  const fs::path ckpt = scratch() / name / "final.adnc";
  EXPECT_NE(r.out.find(ckpt.string()), std::string::npos) << r.out;
  return lootcrawl::nn::load_checkpoint(ckpt);
}

TEST(Cli, HelpAndUnknownFlags) {
  EXPECT_EQ(run("--help").exit_code, 0);
  EXPECT_EQ(run("train --bogus").exit_code, 2);
  EXPECT_EQ(run("train --frontend lstm").exit_code, 2);
  EXPECT_EQ(run("").exit_code, 2);
}

TEST(Cli, TrainWritesCheckpointAndMetrics) {
  const lootcrawl::nn::Checkpoint c = trained("basic", "");
  EXPECT_EQ(c.trained_episodes, 10);
  EXPECT_EQ(c.net.frontend, lootcrawl::nn::FrontendKind::DenseEmbedding);
  const std::string metrics = slurp(scratch() / "basic" / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);  // header + 10 / 5 rows
}

TEST(Cli, FlagsOverrideFile) {
  const lootcrawl::nn::Checkpoint c = trained("override", "--frontend transformer --episodes 25");
  EXPECT_EQ(c.net.frontend, lootcrawl::nn::FrontendKind::Transformer);
  EXPECT_EQ(c.trained_episodes, 25);
}

TEST(Cli, SeedPrecedenceFlagOverEnvOverFile) {
  EXPECT_EQ(trained("seed_file", "--episodes 5").seed, 3u);
  EXPECT_EQ(trained("seed_env", "--episodes 5", "LOOTCRAWL_SEED=11").seed, 11u);
  EXPECT_EQ(trained("seed_flag", "--episodes 5 --seed 17", "LOOTCRAWL_SEED=11").seed, 17u);
  EXPECT_EQ(run("train --quiet --episodes 5 --config " + tiny_config("seed_bad").string(), "LOOTCRAWL_SEED=abc").exit_code, 2);
}

TEST(Cli, ConfigErrorsExitTwoWithDiagnostic) {
  const fs::path broken = scratch() / "broken.json";
  std::ofstream(broken) << "{\"version\": 1, ";
  const CliRun a = run("train --config " + broken.string());
  EXPECT_EQ(a.exit_code, 2);
  EXPECT_FALSE(a.err.empty());
  const fs::path unknown = scratch() / "unknown.json";
  std::ofstream(unknown) << R"({"version": 1, "train": {"learning_rate": 1}})";
  const CliRun b = run("train --config " + unknown.string());
  EXPECT_EQ(b.exit_code, 2);
  EXPECT_NE(b.err.find("/train/learning_rate"), std::string::npos) << b.err;
  EXPECT_EQ(run("train --config " + (scratch() / "absent.json").string()).exit_code, 2);
}

TEST(Cli, InspectAndEvaluate) {
  trained("inspect", "--episodes 5");
  const fs::path ckpt = scratch() / "inspect" / "final.adnc";
  const CliRun i = run("inspect --checkpoint " + ckpt.string());
  EXPECT_EQ(i.exit_code, 0);
  EXPECT_NE(i.out.find("frontend.dense.w"), std::string::npos) << i.out;
  EXPECT_EQ(run("inspect --checkpoint " + (scratch() / "nope.adnc").string()).exit_code, 3);
  const CliRun e = run("evaluate --quiet --episodes 4 --checkpoint " + ckpt.string() + " --config " + tiny_config("eval").string());
  EXPECT_EQ(e.exit_code, 0) << e.err;
  EXPECT_NE(e.out.find("episodes 4"), std::string::npos) << e.out;
  EXPECT_EQ(run("evaluate --checkpoint " + (scratch() / "nope.adnc").string()).exit_code, 3);
}

TEST(Cli, ArenaMatrixAndMissingCheckpoint) {
  for (const char* f : {"dense", "categorical", "transformer"}) {
    const CliRun r = run("train --quiet --episodes 5 --frontend " + std::string(f) + " --out " + (scratch() / "arena_ckpt" / f).string() +
                      " --config " + tiny_config("arena_train").string());
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  const std::string dir = (scratch() / "arena_ckpt").string();
  const std::string pairings = R"(, "arena": {"episodes": 50, "pairings": [
      {"name": "dense_vs_categorical", "a": ")" + dir + R"(/dense/final.adnc", "b": ")" + dir + R"(/categorical/final.adnc"},
      {"name": "transformer_vs_categorical", "a": ")" + dir + R"(/transformer/final.adnc", "b": ")" + dir + R"(/categorical/final.adnc"},
      {"name": "dense_vs_transformer", "a": ")" + dir + R"(/dense/final.adnc", "b": ")" + dir + R"(/transformer/final.adnc"}]})";
  const CliRun a = run("arena --quiet --episodes 2 --config " + tiny_config("arena", pairings).string());
  ASSERT_EQ(a.exit_code, 0) << a.err;
  const std::string csv = slurp(scratch() / "arena" / "arena_report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 28);
  EXPECT_NE(csv.find("warrior,transformer_vs_categorical,skewed,"), std::string::npos);
  // every match was cut to two episodes
  std::istringstream rows(csv);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::vector<int> v;
    std::istringstream cells(line);
    std::string cell;
    for (int k = 0; std::getline(cells, cell, ','); ++k)
      if (k >= 3 && k <= 5) v.push_back(std::stoi(cell));
    EXPECT_EQ(v[0] + v[1] + v[2], 2) << line;
  }
  EXPECT_TRUE(fs::exists(scratch() / "arena" / "arena_report.txt"));

  const std::string missing = R"(, "arena": {"pairings": [{"name": "x", "a": "/nonexistent/{class}.adnc", "b": "/nonexistent/b.adnc"}]})";
  EXPECT_EQ(run("arena --quiet --config " + tiny_config("arena_missing", missing).string()).exit_code, 3);
  EXPECT_EQ(run("arena --quiet --config " + tiny_config("arena_empty").string()).exit_code, 2);
}

TEST(Cli, PlayReadsKeysAndPrintsTally) {
  trained("play", "--episodes 5");
  const fs::path ckpt = scratch() / "play" / "final.adnc";
  const CliRun r = run("play --seed 2 --checkpoint " + ckpt.string(), "", "?\nd\nzz\nfd\np\nquit\n");
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("tally"), std::string::npos) << r.out;
  EXPECT_EQ(run("play --checkpoint " + (scratch() / "nope.adnc").string()).exit_code, 3);
}

}  // namespace
