#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "frl/harness.hpp"
#include "generators.hpp"

using namespace frl;

namespace {

ExperimentConfig q_config(Algorithm algorithm, std::uint64_t episodes, std::vector<std::uint64_t> seeds) {
  ExperimentConfig c;
  c.environment = SymmetricEnvSpec{2, 2, 1, 3, false};
  c.agent.algorithm = algorithm;
  c.episodes = episodes;
  c.seeds = std::move(seeds);
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double least_squares_slope(const std::vector<EpisodeRecord>& records) {
  const double n = static_cast<double>(records.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : records) {
    const double x = static_cast<double>(r.k);
    sx += x;
    sy += r.cumulative_regret;
    sxx += x * x;
    sxy += x * r.cumulative_regret;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(SymmetricEnv, StructureOfQ) {
  const auto mdp = make_symmetric_env(2, 2, 1, 3, 0);
  const auto& g = mdp.structure;
  EXPECT_EQ(g.num_reward_factors(), 1u);
  EXPECT_EQ(g.num_state_factors(), 2u);
  EXPECT_EQ(g.reward_domain(0), 2u);  // J = K^zeta
  EXPECT_EQ(g.reward_bound, 1.0);
  EXPECT_EQ(g.reward_noise, 1.0);
  for (Index j = 0; j < 2; ++j) EXPECT_EQ(g.transition_domain(j), 2u);
  // Scopes are windows of zeta consecutive X indices.
  const auto q = symmetric_structure(3, 2, 2, 2);
  EXPECT_EQ(q.reward_scopes, (std::vector<Scope>{{0, 1}, {1, 2}}));
  EXPECT_EQ(q.transition_scopes, (std::vector<Scope>{{1, 2}, {2, 3}, {0, 3}}));
}

TEST(SymmetricEnv, SameSeedSameEnvironment) {
  EXPECT_EQ(make_symmetric_env(3, 2, 2, 3, 42), make_symmetric_env(3, 2, 2, 3, 42));
  EXPECT_NE(make_symmetric_env(3, 2, 2, 3, 42), make_symmetric_env(3, 2, 2, 3, 43));
}

TEST(SymmetricEnv, RandomConfigsValidate) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Index m = frl::testing::uniform_index(rng, 1, 4);
    const Index K = frl::testing::uniform_index(rng, 1, 3);
    const Index zeta = frl::testing::uniform_index(rng, 1, m + 1);
    const int tau = static_cast<int>(frl::testing::uniform_index(rng, 1, 5));
    const auto mdp = make_symmetric_env(m, K, zeta, tau, trial);
    EXPECT_TRUE(validate(mdp).ok()) << m << " " << K << " " << zeta << " " << tau;
  }
}

TEST(SymmetricEnv, RejectsBadArguments) {
  EXPECT_THROW(symmetric_structure(2, 2, 4, 2), StructureError);
  EXPECT_THROW(symmetric_structure(0, 2, 1, 2), StructureError);
  EXPECT_THROW(make_symmetric_env(12, 4, 1, 2, 0), SizeError);
}

TEST(ProductionLine, NeighbourScopes) {
  const auto g = production_line_structure(3, 2, 4);
  EXPECT_EQ(g.transition_scopes, (std::vector<Scope>{{0, 1, 3}, {0, 1, 2, 3}, {1, 2, 3}}));
  EXPECT_EQ(g.reward_scopes, (std::vector<Scope>{{0}, {1}, {2}}));
  for (Index machines = 1; machines <= 8; ++machines) {
    for (const auto& z : production_line_structure(machines, 2, 2).transition_scopes) EXPECT_LE(z.size(), 4u);
  }
  const auto line = make_production_line(4, 2, 3, 7);
  EXPECT_TRUE(validate(line).ok());
  EXPECT_EQ(flatten(line).num_states, 16u);
}

TEST(EpisodeRegret, OptimalPolicyHasZeroRegret) {
  const auto tab = flatten(make_symmetric_env(2, 3, 2, 3, 5));
  const auto optimal = value_iteration(tab);
  EXPECT_EQ(episode_regret(tab, optimal.policy, optimal.values), 0.0);
}

TEST(EpisodeRegret, BanditArmGap) {
  FactoredMdp bandit;
  bandit.structure.state_sizes = {1};
  bandit.structure.action_sizes = {3};
  bandit.structure.reward_scopes = {{1}};
  bandit.structure.transition_scopes = {{0}};
  bandit.structure.horizon = 1;
  bandit.reward_means = {{0.2, 0.9, 0.5}};
  bandit.transitions = {ProbabilityTable(1, 1)};
  bandit.transitions[0].data = {1.0};
  bandit.initial_distribution = {1.0};
  const auto tab = flatten(bandit);
  const auto optimal = value_iteration(tab);
  Policy arm(1, 1);
  arm.action(0, 0) = 2;
  EXPECT_NEAR(episode_regret(tab, arm, optimal.values), 0.4, 1e-15);
}

TEST(EpisodeRegret, WithinValueRange) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = frl::testing::random_structure(rng);
    const auto tab = flatten(frl::testing::random_mdp(g, rng));
    const auto optimal = value_iteration(tab);
    RandomPolicyAgent agent(tab.num_states, tab.num_actions, tab.horizon);
    const double d = episode_regret(tab, agent.begin_episode(1, rng), optimal.values);
    EXPECT_GE(d, -1e-9);
    EXPECT_LE(d, g.horizon * g.num_reward_factors() * g.reward_bound + 1e-9);
  }
}

TEST(RunExperiment, OracleAgentHasZeroRegret) {
  for (const auto& run : run_experiment(q_config(Algorithm::oracle, 30, {0, 1, 2}))) {
    for (const auto& r : run.records) EXPECT_EQ(r.regret, 0.0);
    EXPECT_EQ(run.regret(), 0.0);
  }
}

TEST(RunExperiment, DegenerateMdpHasZeroRegret) {
  auto config = q_config(Algorithm::psrl, 1, {3});
  config.environment = SymmetricEnvSpec{1, 1, 1, 2, false};
  const auto runs = run_experiment(config);
  ASSERT_EQ(runs[0].records.size(), 1u);
  EXPECT_EQ(runs[0].records[0].regret, 0.0);
  EXPECT_EQ(runs[0].regret(), 0.0);
}

TEST(RunExperiment, RandomAgentRegretGrowsLinearly) {
  // One seeded Q instance; only the agent and simulation streams vary.
  const auto truth = make_symmetric_env(2, 2, 1, 3, 21);
  const auto path = std::filesystem::temp_directory_path() / "frl_random_agent_env.json";
  write_mdp_file(path.string(), truth);
  auto config = q_config(Algorithm::random, 400, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  config.environment = FileEnvSpec{path.string()};

  // A uniformly drawn deterministic policy has the value of the uniformly
  // randomised policy, since each (step, state) choice is independent.
  const auto tab = flatten(truth);
  const auto optimal = value_iteration(tab);
  std::vector<double> v(tab.num_states, 0.0);
  for (int step = tab.horizon - 1; step >= 0; --step) {
    std::vector<double> next(tab.num_states, 0.0);
    for (Index s = 0; s < tab.num_states; ++s) {
      for (Index a = 0; a < tab.num_actions; ++a) next[s] += (tab.reward(s, a) + dot(tab.next(s, a), v)) / tab.num_actions;
    }
    v = next;
  }
  double expected_gap = 0.0;
  for (Index s = 0; s < tab.num_states; ++s) {
    expected_gap += tab.initial_distribution[s] * (optimal.values.value(0, s) - v[s]);
  }
  ASSERT_GT(expected_gap, 0.0);

  std::vector<double> slopes;
  for (const auto& run : run_experiment(config)) slopes.push_back(least_squares_slope(run.records));
  std::filesystem::remove(path);
  const double mean = std::accumulate(slopes.begin(), slopes.end(), 0.0) / slopes.size();
  double var = 0.0;
  for (double s : slopes) {
    EXPECT_GT(s, 0.0);
    EXPECT_NEAR(s, expected_gap, 0.3 * expected_gap);
    var += (s - mean) * (s - mean);
  }
  EXPECT_LT(std::sqrt(var / (slopes.size() - 1)), 0.15 * mean);
}

TEST(RunExperiment, RegretIdentityAgainstStoredPolicies) {
  for (auto algorithm : {Algorithm::psrl, Algorithm::ucrl_factored, Algorithm::random}) {
    for (const auto& run : run_experiment(q_config(algorithm, 40, {11, 12}))) {
      const auto tab = flatten(run.truth);
      const auto optimal = value_iteration(tab);
      double cumulative = 0.0;
      ASSERT_EQ(run.policies.size(), run.records.size());
      for (std::size_t k = 0; k < run.records.size(); ++k) {
        const double d = episode_regret(tab, run.policies[k], optimal.values);
        cumulative += d;
        EXPECT_EQ(run.records[k].regret, d);
        EXPECT_EQ(run.records[k].cumulative_regret, cumulative);
        EXPECT_GE(d, -1e-9);
        EXPECT_EQ(run.records[k].elapsed_steps, double(k + 1) * 3);
      }
    }
  }
}

TEST(RunExperiment, RecordsCarryBoundOverlays) {
  const auto run = run_single(q_config(Algorithm::ucrl_factored, 5, {0}), 0);
  EXPECT_TRUE(std::isnan(run.records[0].bound_psrl));  // T = 3
  EXPECT_FALSE(std::isnan(run.records[1].bound_psrl));
  BoundInputs in;
  in.structure = run.truth.structure;
  in.elapsed_steps = 15.0;
  in.delta = 0.1;
  in.span = run.truth_span;
  in.diameter = run.truth_diameter;
  EXPECT_EQ(run.records[4].bound_psrl, psrl_regret_bound(in));
  EXPECT_EQ(run.records[4].bound_ucrl, ucrl_regret_bound(in));
}

TEST(RunExperiment, LogsHaveHorizonSteps) {
  const auto run = run_single(q_config(Algorithm::psrl, 6, {0}), 4);
  ASSERT_EQ(run.logs.size(), 6u);
  for (const auto& log : run.logs) {
    EXPECT_EQ(log.size(), 3u);
    for (const auto& t : log) {
      EXPECT_EQ(t.x.size(), 3u);
      EXPECT_EQ(t.rewards.size(), 1u);
    }
  }
}

TEST(RunExperiment, FailedRunReportsSeedAndEpisode) {
  auto config = q_config(Algorithm::psrl, 3, {5});
  config.environment = FileEnvSpec{"/nonexistent/mdp.json"};
  try {
    run_experiment(config);
    FAIL() << "expected RunError";
  } catch (const RunError& e) {
    EXPECT_EQ(e.seed(), 5u);
    EXPECT_EQ(e.episode(), 0u);
    EXPECT_NE(std::string(e.what()).find("seed 5"), std::string::npos);
  }
  config = q_config(Algorithm::psrl, 0, {1});
  EXPECT_THROW(run_experiment(config), RunError);
}

TEST(RunExperiment, PriorDrawnEnvironmentUsesEnvironmentStream) {
  auto config = q_config(Algorithm::psrl, 2, {9});
  config.environment = SymmetricEnvSpec{2, 2, 1, 3, true};
  const auto run = run_single(config, 9);
  Rng env = make_stream(9, kEnvironmentStream);
  EXPECT_EQ(run.truth, psrl_sample_mdp(FactoredPosterior::prior(symmetric_structure(2, 2, 1, 3)), env));
}

TEST(Reproducibility, ByteIdenticalAcrossRunsAndJobCounts) {
  for (auto algorithm : {Algorithm::psrl, Algorithm::ucrl_factored, Algorithm::psrl_flat}) {
    auto config = q_config(algorithm, 25, {0, 1, 2, 3});
    const auto a = run_experiment(config);
    config.jobs = 3;
    const auto b = run_experiment(config);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].seed, config.seeds[i]);
      EXPECT_EQ(records_to_csv(a[i].records), records_to_csv(b[i].records));
      EXPECT_EQ(logs_to_json(a[i].logs).dump(), logs_to_json(b[i].logs).dump());
    }
  }
}

TEST(Reproducibility, ArtifactsAreByteIdentical) {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "frl_harness_artifacts";
  fs::remove_all(base);
  auto config = q_config(Algorithm::ucrl_factored, 10, {0, 1});
  write_run_artifacts((base / "a").string(), config, run_experiment(config));
  write_run_artifacts((base / "b").string(), config, run_experiment(config));
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(base / "b" / entry.path().filename())) << entry.path();
  }
  EXPECT_EQ(files, 8u);
  fs::remove_all(base);
}

TEST(ConfigHash, IgnoresSeedsAndOutput) {
  auto a = q_config(Algorithm::psrl, 10, {0});
  auto b = a;
  b.seeds = {1, 2, 3};
  b.output = "elsewhere";
  b.jobs = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.episodes = 11;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Csv, HeaderAndPrefixSums) {
  const auto run = run_single(q_config(Algorithm::random, 4, {0}), 0);
  const auto csv = records_to_csv(run.records);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Coverage, InflatedRadiiCoverEveryRun) {
  auto config = q_config(Algorithm::ucrl_factored, 30, {});
  for (std::uint64_t s = 0; s < 10; ++s) config.seeds.push_back(s);
  const auto runs = run_experiment(config);
  const auto report = coverage_audit(runs, 0.1, 10.0);
  EXPECT_EQ(report.covered, 10u);
  EXPECT_EQ(report.fraction, 1.0);
}

TEST(Coverage, InlineFlagsAgreeWithReplay) {
  auto config = q_config(Algorithm::ucrl_factored, 30, {0, 1, 2, 3, 4});
  config.audit.coverage = true;
  for (const auto& run : run_experiment(config)) {
    const bool inline_all = std::all_of(run.records.begin(), run.records.end(),
                                        [](const EpisodeRecord& r) { return r.covered; });
    EXPECT_EQ(inline_all, covered_throughout(run.truth, run.logs, 0.1));
  }
}

TEST(Coverage, ReportLowerLimit) {
  const auto r = coverage_report(190, 200);
  EXPECT_NEAR(r.fraction, 0.95, 1e-15);
  EXPECT_NEAR(r.standard_error, std::sqrt(0.95 * 0.05 / 200), 1e-15);
  EXPECT_LT(r.lower_limit, 0.95);
  EXPECT_GT(r.lower_limit, 0.90);
  EXPECT_EQ(coverage_report(0, 10).lower_limit, 0.0);
  // All covered: the one-sided limit is 0.05^(1/n).
  EXPECT_NEAR(coverage_report(20, 20).lower_limit, std::pow(0.05, 1.0 / 20), 1e-12);
}

TEST(WidthAudit, HoldsOnHarnessRuns) {
  for (auto algorithm : {Algorithm::psrl, Algorithm::ucrl_factored, Algorithm::random}) {
    for (const auto& run : run_experiment(q_config(algorithm, 60, {0, 1}))) {
      for (const auto& check : audit_width_sums(run.truth.structure, run.logs, run.delta)) {
        EXPECT_LE(check.audit.empirical, check.audit.bound);
      }
    }
  }
}

TEST(WidthAudit, PerEpisodeSumsMatchRecords) {
  const auto run = run_single(q_config(Algorithm::ucrl_factored, 20, {0}), 0);
  const auto checks = audit_width_sums(run.truth.structure, run.logs, run.delta);
  double reward = 0.0, transition = 0.0;
  for (const auto& r : run.records) {
    reward += r.width_sum_reward;
    transition += r.width_sum_transition;
  }
  double audit_reward = 0.0, audit_transition = 0.0;
  for (const auto& c : checks) (c.kind == FactorKind::reward ? audit_reward : audit_transition) += c.audit.empirical;
  EXPECT_NEAR(reward, audit_reward, 1e-9 * std::max(1.0, reward));
  EXPECT_NEAR(transition, audit_transition, 1e-9 * std::max(1.0, transition));
}
