#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "spikesync_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(SPIKESYNC_CLI) + " " + args + " > " + (kRoot / "stdout.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string path(const std::string& rel) { return (kRoot / rel).string(); }

class Cli : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    std::ofstream(kRoot / "short.toml") << "[sampler]\nburn_in = 50\ndraws = 120\n";
  }
};

} // namespace

TEST_F(Cli, SimulateWritesEnsembleAndEcho) {
  ASSERT_EQ(run("simulate --preset scenario1 --seed 5 --out " + path("sim1")), 0);
  const auto j = nlohmann::json::parse(slurp(kRoot / "sim1/ensemble.json"));
  ASSERT_EQ(j["neurons"].size(), 2u);
  EXPECT_EQ(j["neurons"][0]["trials"].size(), 40u);
  EXPECT_EQ(j["neurons"][0]["trials"][0].size(), 100u);
  const auto cfg = nlohmann::json::parse(slurp(kRoot / "sim1/config.json"));
  EXPECT_EQ(cfg["seed"], 5);
  EXPECT_EQ(cfg["command"], "simulate");
}

TEST_F(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(run("simulate --preset scenario2 --seed 7 --out " + path("d1")), 0);
  ASSERT_EQ(run("simulate --preset scenario2 --seed 7 --out " + path("d2")), 0);
  EXPECT_EQ(slurp(kRoot / "d1/ensemble.json"), slurp(kRoot / "d2/ensemble.json"));
}

TEST_F(Cli, SimulateCsvFormat) {
  ASSERT_EQ(run("simulate --preset triplet --format csv --out " + path("csv")), 0);
  EXPECT_TRUE(fs::exists(kRoot / "csv/ensemble/n3.csv"));
}

TEST_F(Cli, BadSpecExitsTwoNamingField) {
  std::ofstream(kRoot / "bad.toml") << "[scenario]\npreset = \"scenario1\"\ntrials = 0\n";
  EXPECT_EQ(run("simulate --config " + path("bad.toml") + " --out " + path("bad")), 2);
  EXPECT_NE(slurp(kRoot / "stdout.txt").find("trials"), std::string::npos);
  EXPECT_EQ(run("simulate --preset nope"), 2);
  EXPECT_EQ(run("fit-pair --data " + path("missing.json")), 2);
}

TEST_F(Cli, FitPairWritesSummaryAndChain) {
  ASSERT_EQ(run("simulate --preset scenario2 --out " + path("fp_in")), 0);
  ASSERT_EQ(run("fit-pair --data " + path("fp_in/ensemble.json") + " --config " + path("short.toml") + " --out " +
                path("fp")),
            0);
  const auto s = nlohmann::json::parse(slurp(kRoot / "fp/summary.json"));
  for (const char* k : {"zeta_median", "zeta_ci95", "lag_posterior", "significant"}) EXPECT_TRUE(s.contains(k)) << k;
  EXPECT_EQ(s["lag_posterior"].size(), 21u);
  const std::string chain = slurp(kRoot / "fp/chain.csv");
  EXPECT_EQ(chain.rfind("iteration,zeta,lag", 0), 0u);
  EXPECT_EQ(std::count(chain.begin(), chain.end(), '\n'), 121);
}

TEST_F(Cli, FitPairSelectsNeuronsById) {
  ASSERT_EQ(run("simulate --preset triplet --out " + path("fp3_in")), 0);
  ASSERT_EQ(run("fit-pair --data " + path("fp3_in/ensemble.json") + " --neurons n1,n3 --no-chain --config " +
                path("short.toml") + " --out " + path("fp3")),
            0);
  const auto s = nlohmann::json::parse(slurp(kRoot / "fp3/summary.json"));
  EXPECT_EQ(s["neurons"][1], "n3");
  EXPECT_FALSE(fs::exists(kRoot / "fp3/chain.csv"));
  EXPECT_EQ(run("fit-pair --data " + path("fp3_in/ensemble.json") + " --neurons n1,n9 --out " + path("fp4")), 2);
}

TEST_F(Cli, FitMultiWritesMatrixAndAdjacency) {
  ASSERT_EQ(run("simulate --preset triplet --out " + path("fm_in")), 0);
  ASSERT_EQ(run("fit-multi --data " + path("fm_in/ensemble.json") + " --config " + path("short.toml") + " --out " +
                path("fm")),
            0);
  const auto p = nlohmann::json::parse(slurp(kRoot / "fm/pairs.json"));
  EXPECT_EQ(p["matrix"].size(), 3u);
  EXPECT_TRUE(p["matrix"][0][1].contains("beta_median"));
  EXPECT_TRUE(p["matrix"][1][0].is_null());
  const auto a = nlohmann::json::parse(slurp(kRoot / "fm/adjacency.json"));
  EXPECT_TRUE(a["edges"].is_array());
}

TEST_F(Cli, PsthFromEventTimes) {
  std::ofstream(kRoot / "ev.json") << R"({"trial_duration_s": 10.0, "neurons": [
      {"id": "a", "trials": [[0.1, 5.0], [2.0]]}, {"id": "b", "trials": [[0.1], []]}]})";
  ASSERT_EQ(run("psth --events " + path("ev.json") + " --bin-width 0.005 --out " + path("ps")), 0);
  const std::string a = slurp(kRoot / "ps/psth_a.csv");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 2001);
  EXPECT_TRUE(fs::exists(kRoot / "ps/jpsth.csv"));
  EXPECT_EQ(run("psth --events " + path("ev.json") + " --out " + path("ps2")), 2);
}

TEST_F(Cli, PowerWithTinyConfig) {
  std::ofstream(kRoot / "pw.toml") << "[sampler]\nburn_in = 20\ndraws = 100\n[experiment]\ntrials = [20]\neffects = [1.0]\n";
  ASSERT_EQ(run("power --config " + path("pw.toml") + " --replicates 2 --threads 2 --out " + path("pw")), 0);
  const std::string csv = slurp(kRoot / "pw/report.csv");
  EXPECT_EQ(csv.rfind("scenario,R,zeta_or_b1,noise,replicates,rejection_rate\npower-sync,20,1,0,2,", 0), 0u) << csv;
}

TEST_F(Cli, UnknownConfigFieldIsValidationError) {
  std::ofstream(kRoot / "typo.toml") << "[sampler]\ndrawz = 5\n";
  EXPECT_EQ(run("fit-pair --data x.json --config " + path("typo.toml")), 2);
  EXPECT_NE(slurp(kRoot / "stdout.txt").find("sampler.drawz"), std::string::npos);
}
