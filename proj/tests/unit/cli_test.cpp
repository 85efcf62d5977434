#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "frl/cli.hpp"

using namespace frl;
namespace fs = std::filesystem;

namespace {

const std::string kData = FRL_TEST_DATA_DIR;

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("frl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, RunWritesOneCsvPerSeed) {
  const auto r = invoke({"run", kData + "/q_ucrl.toml", "--out", path("runs")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int seed : {0, 1}) {
    const auto stem = "runs/run_" + std::to_string(seed);
    EXPECT_TRUE(fs::exists(path(stem + ".csv")));
    EXPECT_TRUE(fs::exists(path(stem + ".manifest.json")));
    EXPECT_TRUE(fs::exists(path(stem + ".log.json")));
    EXPECT_TRUE(fs::exists(path(stem + ".mdp.json")));
  }
  const auto csv = slurp(path("runs/run_0.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
  EXPECT_NE(r.out.find("seed"), std::string::npos);
}

TEST_F(CliTest, RerunGivesIdenticalBytes) {
  ASSERT_EQ(invoke({"run", kData + "/q_ucrl.toml", "--out", path("a")}).code, 0);
  ASSERT_EQ(invoke({"run", kData + "/q_ucrl.toml", "--out", path("b"), "--jobs", "2"}).code, 0);
  for (const auto& name : {"run_0.csv", "run_1.csv", "run_0.log.json", "run_1.manifest.json"}) {
    EXPECT_EQ(slurp(path(std::string("a/") + name)), slurp(path(std::string("b/") + name))) << name;
  }
}

TEST_F(CliTest, SeedOverride) {
  ASSERT_EQ(invoke({"run", kData + "/q_ucrl.toml", "--out", path("runs"), "--seed", "7", "--seed", "8"}).code, 0);
  EXPECT_TRUE(fs::exists(path("runs/run_7.csv")));
  EXPECT_TRUE(fs::exists(path("runs/run_8.csv")));
  EXPECT_FALSE(fs::exists(path("runs/run_0.csv")));
}

TEST_F(CliTest, JsonConfigWithFileEnvironment) {
  const auto r = invoke({"run", kData + "/file_env.json", "--out", path("runs"), "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_TRUE(doc.dump().find("4") != std::string::npos);
  const auto manifest = read_json_file(path("runs/run_4.manifest.json"));
  EXPECT_EQ(manifest.at("library_version"), kLibraryVersion);
  EXPECT_EQ(manifest.at("seed"), 4);
  EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);
}

TEST_F(CliTest, UnknownAgentTagNamesTheField) {
  const auto r = invoke({"run", kData + "/unknown_agent.toml", "--out", path("runs")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("agent.algorithm"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("runs")));
}

TEST_F(CliTest, UnknownKeyAndTomlSyntaxErrors) {
  {
    std::ofstream f(path("typo.toml"));
    f << "episodes = 5\nepisodez = 6\n[environment]\nkind = \"symmetric\"\nm = 2\nK = 2\nzeta = 1\ntau = 2\n"
         "[agent]\nalgorithm = \"psrl\"\n";
  }
  auto r = invoke({"run", path("typo.toml"), "--out", path("runs")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("episodez"), std::string::npos) << r.err;
  {
    std::ofstream f(path("broken.toml"));
    f << "episodes = \n";
  }
  r = invoke({"run", path("broken.toml")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("broken.toml:1"), std::string::npos) << r.err;
  r = invoke({"run", path("missing.toml")});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, CapExceededIsConfigError) {
  {
    std::ofstream f(path("huge.toml"));
    f << "episodes = 5\n[environment]\nkind = \"symmetric\"\nm = 14\nK = 4\nzeta = 1\ntau = 2\n"
         "[agent]\nalgorithm = \"psrl\"\n";
  }
  const auto r = invoke({"run", path("huge.toml"), "--out", path("runs")});
  EXPECT_EQ(r.code, 1) << r.err;
  EXPECT_EQ(invoke({"validate", path("huge.toml")}).code, 1);
}

TEST_F(CliTest, InvalidEnvironmentFileIsConfigError) {
  {
    std::ofstream f(path("bad_env.json"));
    f << R"({"episodes": 3, "environment": {"kind": "file", "path": "bad_row_sum_copy.json"},
             "agent": {"algorithm": "psrl"}})";
  }
  fs::copy_file(kData + "/bad_row_sum.json", path("bad_row_sum_copy.json"));
  const auto r = invoke({"run", path("bad_env.json"), "--out", path("runs")});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_FALSE(fs::exists(path("runs")));
}

TEST_F(CliTest, RuntimeFailureExitsTwo) {
  write_text_file(path("occupied"), "not a directory");
  const auto r = invoke({"run", kData + "/q_ucrl.toml", "--out", path("occupied/runs")});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("runtime error"), std::string::npos);
}

TEST_F(CliTest, BoundsMatchLibrary) {
  const auto r = invoke({"bounds", "--m", "2", "--K", "2", "--zeta", "1", "--tau", "2", "--T", "1000", "--psi",
                         "1", "--diameter", "3", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  BoundInputs in;
  in.structure = symmetric_structure(2, 2, 1, 2);
  in.elapsed_steps = 1000;
  in.delta = 0.1;
  in.span = 1;
  in.diameter = 3;
  EXPECT_EQ(doc["bounds"]["psrl_regret_bound"].get<double>(), psrl_regret_bound(in));
  EXPECT_EQ(doc["bounds"]["ucrl_regret_bound"].get<double>(), ucrl_regret_bound(in));
  EXPECT_EQ(doc["bounds"]["corollary_psrl"].get<double>(), corollary_psrl(2, 2, 2, 2, 1000));
  EXPECT_EQ(doc["bounds"]["corollary_ucrl"].get<double>(), corollary_ucrl(2, 2, 2, 2, 1000, 0.1));
  EXPECT_EQ(doc["inputs"]["k"].get<double>(), 500.0);
}

TEST_F(CliTest, BoundsHumanTableHasFourRows) {
  const auto r = invoke({"bounds", "--m", "2", "--K", "2", "--zeta", "1", "--tau", "2", "--T", "1000", "--psi",
                         "1", "--diameter", "3"});
  ASSERT_EQ(r.code, 0);
  for (const auto& name : {"psrl_regret_bound", "ucrl_regret_bound", "corollary_psrl 11376.1", "corollary_ucrl 13724.9"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name << "\n" << r.out;
  }
}

TEST_F(CliTest, BoundsDomainErrorAtSmallT) {
  const auto r = invoke({"bounds", "--m", "2", "--K", "2", "--zeta", "1", "--tau", "2", "--T", "4", "--psi", "1",
                         "--diameter", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("psrl_regret_bound: domain error"), std::string::npos) << r.err;
}

TEST_F(CliTest, BoundsFromMdpFile) {
  const auto r = invoke({"bounds", "--mdp", kData + "/two_factor.json", "--T", "300", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_TRUE(doc["bounds"]["corollary_psrl"].is_null());
  const auto mdp = read_mdp_file(kData + "/two_factor.json");
  const auto tab = flatten(mdp);
  EXPECT_EQ(doc["inputs"]["psi"].get<double>(), span(value_iteration(tab).values.at(0)));
  EXPECT_EQ(invoke({"bounds", "--m", "2", "--K", "2", "--zeta", "1", "--tau", "2", "--T", "100"}).code, 1);
}

TEST_F(CliTest, AuditUntouchedDirectoryPasses) {
  ASSERT_EQ(invoke({"run", kData + "/q_ucrl.toml", "--out", path("runs")}).code, 0);
  const auto r = invoke({"audit", path("runs")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("run_0: PASS"), std::string::npos);
  EXPECT_NE(r.out.find("coverage: "), std::string::npos);
  const auto j = invoke({"audit", path("runs"), "--format", "json"});
  EXPECT_TRUE(json::parse(j.out)["ok"].get<bool>());
}

TEST_F(CliTest, AuditNamesTamperedEpisode) {
  ASSERT_EQ(invoke({"run", kData + "/q_ucrl.toml", "--out", path("runs")}).code, 0);
  const auto csv_path = path("runs/run_1.csv");
  std::istringstream in(slurp(csv_path));
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("3,", 0) == 0) {
      // Inflate width_sum_reward (the seventh column).
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      cells[6] = format_double(std::stod(cells[6]) * 2.0 + 1.0);
      line.clear();
      for (std::size_t c = 0; c < cells.size(); ++c) line += (c ? "," : "") + cells[c];
    }
    out << line << "\n";
  }
  write_text_file(csv_path, out.str());
  const auto r = invoke({"audit", path("runs")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("run_1: FAIL"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("episode 3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("run_0: PASS"), std::string::npos) << r.out;
}

TEST_F(CliTest, AuditEmptyDirectory) {
  const auto r = invoke({"audit", dir_.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no runs found"), std::string::npos);
}

TEST_F(CliTest, AuditCorruptLog) {
  ASSERT_EQ(invoke({"run", kData + "/q_ucrl.toml", "--out", path("runs")}).code, 0);
  write_text_file(path("runs/run_0.log.json"), "{");
  const auto r = invoke({"audit", path("runs")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("corrupt or missing"), std::string::npos) << r.out;
}

TEST_F(CliTest, ValidateFmdpAndConfig) {
  EXPECT_EQ(invoke({"validate", kData + "/two_factor.json"}).code, 0);
  const auto bad = invoke({"validate", kData + "/bad_row_sum.json", "--format", "json"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(json::parse(bad.out)["ok"].get<bool>());
  const auto cfg = invoke({"validate", kData + "/q_ucrl.toml"});
  EXPECT_EQ(cfg.code, 0);
  EXPECT_NE(cfg.out.find("config ok"), std::string::npos);
  EXPECT_EQ(invoke({"validate", kData + "/unknown_agent.toml"}).code, 1);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({"bounds", "--m", "2"}).code, 1);
  EXPECT_EQ(invoke({"--version"}).code, 0);
}

TEST_F(CliTest, ConfigHashIsStableAcrossFormats) {
  {
    std::ofstream f(path("same.json"));
    f << R"({"episodes": 30, "seeds": [0, 1],
             "environment": {"kind": "symmetric", "m": 2, "K": 2, "zeta": 1, "tau": 3},
             "agent": {"algorithm": "ucrl-factored", "delta": 0.1},
             "audit": {"width": true, "coverage": true}})";
  }
  EXPECT_EQ(config_hash(load_config(path("same.json"))), config_hash(load_config(kData + "/q_ucrl.toml")));
}

TEST_F(CliTest, BinaryRunsEndToEnd) {
  const std::string cmd = std::string(FRL_CLI_PATH) + " validate " + kData + "/two_factor.json > " +
                          path("stdout.txt") + " 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_NE(slurp(path("stdout.txt")).find("fmdp ok"), std::string::npos);
  const std::string bad = std::string(FRL_CLI_PATH) + " audit " + dir_.string() + " > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 1);
}
