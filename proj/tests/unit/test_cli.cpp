#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <string>

#include "test_util.hpp"

namespace {

using drl::testing::read_file;
using drl::testing::TempDir;
using drl::testing::write_file;

struct Result {
  int code = -1;
  std::string output;
};

// Runs the drl binary with stdout and stderr captured together.
Result run(const std::string& args) {
  const std::string command = std::string(DRL_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

TEST(Cli, MissingInputExitsTwoAndNamesThePath) {
  TempDir dir;
  write_file(dir / "config.json", R"({"input": {"paths": ["nowhere.jsonl"]}, "query": "x"})");
  const auto r = run("score --config " + q(dir / "config.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("nowhere.jsonl"), std::string::npos) << r.output;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("score").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, FixtureTrainScorePerturbRank) {
  TempDir dir;
  ASSERT_EQ(run("fixture --docs-per-set 40 -o " + q(dir.path())).code, 0);
  // Shrink the run so the test stays quick.
  std::string config = read_file(dir / "config.json");
  const auto swap = [&](const std::string& from, const std::string& to) {
    const auto at = config.find(from);
    ASSERT_NE(at, std::string::npos) << from;
    config.replace(at, from.size(), to);
  };
  swap("\"train_iterations\": 500", "\"train_iterations\": 40");
  swap("\"min_doc_freq\": 5", "\"min_doc_freq\": 2");
  write_file(dir / "small.json", config);

  const std::string base = "--config " + q(dir / "small.json");
  auto r = run("train " + base + " -o " + q(dir / "model"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "model" / "model.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "model" / "vocab.json"));

  r = run("score " + base + " --runs 2 --seed 5 -o " + q(dir / "s1"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("1     A"), std::string::npos) << r.output;

  r = run("score " + base + " --runs 2 --model " + q(dir / "model" / "model.json") + " -o " + q(dir / "s2"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(read_file(dir / "s2" / "report.json").find("reuse-model"), std::string::npos);

  r = run("perturb " + base + " --runs 2 --spec " + q(dir / "perturbations.json") + " -o " + q(dir / "p"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "p" / "sensitivity.csv"));

  r = run("rank " + q(dir / "s1" / "report.json") + " --delta 0.01 -o " + q(dir / "r"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "r" / "rank.json"));

  // Two reports holding the same sets cannot be merged.
  r = run("rank " + q(dir / "s1" / "report.json") + " " + q(dir / "s1" / "report.json"));
  EXPECT_EQ(r.code, 2) << r.output;
}

TEST(Cli, FailedPerturbationRowsExitOne) {
  TempDir dir;
  ASSERT_EQ(run("fixture --docs-per-set 30 -o " + q(dir.path())).code, 0);
  write_file(dir / "bad.json", R"([{"label": "x", "kind": "deletion", "position_or_term": "hockey"}])");
  std::string config = read_file(dir / "config.json");
  config.replace(config.find("\"train_iterations\": 500"), 23, "\"train_iterations\": 20");
  write_file(dir / "config.json", config);
  const auto r = run("perturb --config " + q(dir / "config.json") + " --runs 1 --spec " +
                     q(dir / "bad.json") + " -o " + q(dir / "p"));
  EXPECT_EQ(r.code, 1) << r.output;
}

}  // namespace
