#pragma once

// Environment builders, the episodic simulation loop, exact regret
// accounting and replayable audit logs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "frl/agents.hpp"
#include "frl/bounds.hpp"
#include "frl/core.hpp"
#include "frl/estimation.hpp"
#include "frl/planner.hpp"
#include "frl/serialization.hpp"

namespace frl {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Stream identifiers split from one master seed.
inline constexpr std::uint64_t kEnvironmentStream = 1;
inline constexpr std::uint64_t kAgentStream = 2;
inline constexpr std::uint64_t kSimulationStream = 3;

/// The symmetric structure Q: m state factors and one action factor, all of
/// size K, l = m - 1 reward factors, C = sigma = 1. Scopes are cyclic windows
/// of zeta consecutive indices of X: reward factor i starts at index i and
/// transition factor j starts at index j + 1, so the last transition factor
/// always sees the action.
inline GraphStructure symmetric_structure(Index m, Index K, Index zeta, int tau) {
  if (m < 1 || K < 1 || tau < 1) throw StructureError("symmetric structure needs m, K, tau >= 1");
  const Index n = m + 1;
  if (zeta < 1 || zeta > n) {
    throw StructureError("scope size zeta must lie in [1, " + std::to_string(n) + "]");
  }
  auto window = [&](Index start) {
    Scope z;
    for (Index t = 0; t < zeta; ++t) z.push_back((start + t) % n);
    std::sort(z.begin(), z.end());
    return z;
  };
  GraphStructure g;
  g.state_sizes.assign(m, K);
  g.action_sizes = {K};
  for (Index i = 0; i + 1 < m; ++i) g.reward_scopes.push_back(window(i));
  for (Index j = 0; j < m; ++j) g.transition_scopes.push_back(window(j + 1));
  g.horizon = tau;
  g.reward_bound = 1.0;
  g.reward_noise = 1.0;
  return g;
}

namespace detail {

inline void check_cap(const GraphStructure& g, Index cap) {
  const Index S = g.num_states();
  const Index A = g.num_actions();
  if (A != 0 && S > cap / A) {
    throw SizeError("environment |S|*|A| = " + std::to_string(S) + "*" + std::to_string(A) +
                    " exceeds the desk-scale cap " + std::to_string(cap));
  }
}

/// Dirichlet(1) transition rows, Uniform[0, C] reward means, uniform rho.
inline FactoredMdp random_tables(const GraphStructure& g, Rng& rng) {
  FactoredMdp mdp;
  mdp.structure = g;
  std::uniform_real_distribution<double> unif(0.0, g.reward_bound);
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    std::vector<double> means(g.reward_domain(i));
    for (double& mean : means) mean = unif(rng);
    mdp.reward_means.push_back(std::move(means));
  }
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    ProbabilityTable table(g.transition_domain(j), g.state_sizes[j]);
    const std::vector<double> ones(g.state_sizes[j], 1.0);
    for (Index z = 0; z < table.rows; ++z) {
      auto row = sample_dirichlet(ones, rng);
      std::copy(row.begin(), row.end(), table.row(z).begin());
    }
    mdp.transitions.push_back(std::move(table));
  }
  const Index S = g.num_states();
  mdp.initial_distribution.assign(S, 1.0 / static_cast<double>(S));
  return mdp;
}

}  // namespace detail

inline FactoredMdp make_symmetric_env(Index m, Index K, Index zeta, int tau, std::uint64_t seed,
                                      Index cap = kDefaultDeskCap) {
  const GraphStructure g = symmetric_structure(m, K, zeta, tau);
  detail::check_cap(g, cap);
  Rng rng = make_stream(seed, kEnvironmentStream);
  return detail::random_tables(g, rng);
}

/// Production line: machine j's next condition depends on machines j-1, j,
/// j+1 and on the action, which selects the machine to service. Each machine
/// contributes one reward factor scoped on its own condition.
inline GraphStructure production_line_structure(Index machines, Index K, int tau) {
  if (machines < 1 || K < 1 || tau < 1) {
    throw StructureError("production line needs machines, K, tau >= 1");
  }
  GraphStructure g;
  g.state_sizes.assign(machines, K);
  g.action_sizes = {machines};
  const Index action = machines;
  for (Index j = 0; j < machines; ++j) {
    Scope z;
    if (j > 0) z.push_back(j - 1);
    z.push_back(j);
    if (j + 1 < machines) z.push_back(j + 1);
    z.push_back(action);
    g.transition_scopes.push_back(std::move(z));
    g.reward_scopes.push_back({j});
  }
  g.horizon = tau;
  g.reward_bound = 1.0;
  g.reward_noise = 1.0;
  return g;
}

inline FactoredMdp make_production_line(Index machines, Index K, int tau, std::uint64_t seed,
                                        Index cap = kDefaultDeskCap) {
  const GraphStructure g = production_line_structure(machines, K, tau);
  detail::check_cap(g, cap);
  Rng rng = make_stream(seed, kEnvironmentStream);
  return detail::random_tables(g, rng);
}

/// Delta_k = sum_s rho(s) (V*_1(s) - V^{mu_k}_1(s)), evaluated exactly.
inline double episode_regret(const TabularMdp& truth, const Policy& policy,
                             const ValueTable& optimal) {
  const ValueTable v = policy_value(truth, policy);
  const auto vstar = optimal.at(0);
  const auto vmu = v.at(0);
  double delta = 0.0;
  for (Index s = 0; s < truth.num_states; ++s) {
    delta += truth.initial_distribution[s] * (vstar[s] - vmu[s]);
  }
  return delta;
}

struct SymmetricEnvSpec {
  Index m = 2;
  Index K = 2;
  Index zeta = 1;
  int tau = 2;
  /// Draw M* from the default PSRL prior instead of Uniform/Dirichlet tables.
  bool draw_from_prior = false;
};

struct ProductionLineSpec {
  Index machines = 3;
  Index K = 2;
  int tau = 4;
};

struct FileEnvSpec {
  std::string path;
};

using EnvironmentSpec = std::variant<SymmetricEnvSpec, ProductionLineSpec, FileEnvSpec>;

struct AuditFlags {
  bool width = true;
  bool coverage = false;
};

struct ExperimentConfig {
  EnvironmentSpec environment = SymmetricEnvSpec{};
  AgentConfig agent;
  std::uint64_t episodes = 1;
  std::vector<std::uint64_t> seeds{0};
  std::string output;
  AuditFlags audit;
  Index cap = kDefaultDeskCap;
  int jobs = 1;
};

inline json environment_to_json(const EnvironmentSpec& env) {
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, SymmetricEnvSpec>) {
          return {{"kind", "symmetric"}, {"m", e.m}, {"K", e.K}, {"zeta", e.zeta},
                  {"tau", e.tau}, {"draw_from_prior", e.draw_from_prior}};
        } else if constexpr (std::is_same_v<T, ProductionLineSpec>) {
          return {{"kind", "production-line"}, {"machines", e.machines}, {"K", e.K}, {"tau", e.tau}};
        } else {
          return {{"kind", "file"}, {"path", e.path}};
        }
      },
      env);
}

inline json agent_to_json(const AgentConfig& a) {
  json j{{"algorithm", to_string(a.algorithm)},
         {"delta", a.delta},
         {"alpha0", a.prior.alpha0},
         {"sweeps", a.sweeps},
         {"optimism", a.optimism == OptimismMode::coordinate_ascent ? "coordinate-ascent"
                                                                    : "joint-relaxation"}};
  if (a.prior.mu0) j["mu0"] = *a.prior.mu0;
  if (a.prior.v0) j["v0"] = *a.prior.v0;
  return j;
}

/// Everything that determines a run's output except the seed.
inline json canonical_config(const ExperimentConfig& c) {
  return json{{"environment", environment_to_json(c.environment)},
              {"agent", agent_to_json(c.agent)},
              {"episodes", c.episodes},
              {"audit", {{"width", c.audit.width}, {"coverage", c.audit.coverage}}},
              {"cap", c.cap}};
}

/// FNV-1a of the canonical configuration, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_config(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline FactoredMdp build_environment(const EnvironmentSpec& env, std::uint64_t seed, Index cap) {
  return std::visit(
      [&](const auto& e) -> FactoredMdp {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, SymmetricEnvSpec>) {
          if (!e.draw_from_prior) return make_symmetric_env(e.m, e.K, e.zeta, e.tau, seed, cap);
          const GraphStructure g = symmetric_structure(e.m, e.K, e.zeta, e.tau);
          detail::check_cap(g, cap);
          Rng rng = make_stream(seed, kEnvironmentStream);
          return psrl_sample_mdp(FactoredPosterior::prior(g), rng);
        } else if constexpr (std::is_same_v<T, ProductionLineSpec>) {
          return make_production_line(e.machines, e.K, e.tau, seed, cap);
        } else {
          FactoredMdp mdp = read_mdp_file(e.path);
          auto report = validate(mdp);
          if (!report.ok()) {
            throw SchemaError(e.path, "invalid FMDP: " + report.violations.front().message);
          }
          detail::check_cap(mdp.structure, cap);
          return mdp;
        }
      },
      env);
}

struct EpisodeRecord {
  std::uint64_t k = 0;
  double regret = 0.0;             // Delta_k
  double cumulative_regret = 0.0;  // prefix sum of Delta_k
  double elapsed_steps = 0.0;      // T = k tau
  double bound_psrl = 0.0;         // PSRL bound at T with Psi(M*); NaN when T <= 4
  double bound_ucrl = 0.0;         // UCRL-Factored bound at T with D(M*) and the agent's delta
  double width_sum_reward = 0.0;
  double width_sum_transition = 0.0;
  double planned_value_gap = 0.0;  // rho . (V_planned_1 - V*_1)
  bool covered = true;             // M* in M_k (only when the coverage audit is on)
  double wall_clock_ms = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::string config_hash;
  FactoredMdp truth;
  double truth_span = 0.0;
  double truth_diameter = 0.0;
  double delta = 0.1;
  std::vector<EpisodeRecord> records;
  std::vector<EpisodeLog> logs;
  std::vector<Policy> policies;

  double regret() const { return records.empty() ? 0.0 : records.back().cumulative_regret; }
};

/// A run failed; carries the seed and episode where it happened.
class RunError : public std::runtime_error {
 public:
  RunError(std::uint64_t seed, std::uint64_t episode, const std::string& what)
      : std::runtime_error("run with seed " + std::to_string(seed) + " failed at episode " +
                           std::to_string(episode) + ": " + what),
        seed_(seed),
        episode_(episode) {}
  std::uint64_t seed() const { return seed_; }
  std::uint64_t episode() const { return episode_; }

 private:
  std::uint64_t seed_;
  std::uint64_t episode_;
};

inline std::unique_ptr<Agent> make_agent(const AgentConfig& config, const FactoredMdp& truth,
                                         const PlanResult& optimal, Index cap) {
  const auto& g = truth.structure;
  switch (config.algorithm) {
    case Algorithm::psrl:
    case Algorithm::psrl_flat:
      return std::make_unique<PsrlAgent>(g, config, cap);
    case Algorithm::ucrl_factored:
    case Algorithm::ucrl_flat:
      return std::make_unique<UcrlAgent>(g, config, cap);
    case Algorithm::oracle:
      return std::make_unique<FixedPolicyAgent>(optimal.policy, optimal.values);
    case Algorithm::random:
      return std::make_unique<RandomPolicyAgent>(g.num_states(), g.num_actions(), g.horizon);
  }
  throw std::logic_error("unhandled algorithm");
}

/// Width sums of one episode under a family (counts frozen at the episode start).
inline std::pair<double, double> episode_width_sums(const ConfidenceFamily& family,
                                                    const EpisodeLog& log) {
  const auto& g = family.structure();
  double reward = 0.0;
  double transition = 0.0;
  for (const auto& t : log) {
    for (Index i = 0; i < g.num_reward_factors(); ++i) {
      reward += width(family, FactorKind::reward, i, scope_row(g, t.x, g.reward_scopes[i]));
    }
    for (Index j = 0; j < g.num_state_factors(); ++j) {
      transition +=
          width(family, FactorKind::transition, j, scope_row(g, t.x, g.transition_scopes[j]));
    }
  }
  return {reward, transition};
}

/// Regret bound values at T, NaN where the bound is undefined.
inline std::pair<double, double> bound_overlay(const GraphStructure& g, double T, double delta,
                                               double span_value, double diameter_value) {
  BoundInputs in{g, T, delta, span_value, diameter_value, std::nullopt};
  const double psrl = T > 4.0 ? psrl_regret_bound(in) : std::nan("");
  return {psrl, ucrl_regret_bound(in)};
}

/// One seeded run: M* drawn or loaded from the environment stream, the agent
/// on its own stream, trajectories on a third.
inline RunResult run_single(const ExperimentConfig& config, std::uint64_t seed) {
  RunResult run;
  run.seed = seed;
  run.config_hash = config_hash(config);
  run.delta = config.agent.delta;
  std::uint64_t k = 0;
  try {
    config.agent.check();
    if (config.episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    run.truth = build_environment(config.environment, seed, config.cap);
    const auto& g = run.truth.structure;
    const TabularMdp truth_tab = flatten(run.truth, config.cap);
    const PlanResult optimal = value_iteration(truth_tab);
    run.truth_span = span(optimal.values.at(0));
    run.truth_diameter = diameter(truth_tab);
    const double optimal_value = initial_value(optimal.values, truth_tab.initial_distribution);

    auto agent = make_agent(config.agent, run.truth, optimal, config.cap);
    Rng agent_rng = make_stream(seed, kAgentStream);
    Rng sim_rng = make_stream(seed, kSimulationStream);
    FactorStats audit_stats(g);
    double cumulative = 0.0;

    for (k = 1; k <= config.episodes; ++k) {
      const auto start = std::chrono::steady_clock::now();
      Policy policy = agent->begin_episode(k, agent_rng);
      EpisodeRecord rec;
      rec.k = k;
      rec.regret = episode_regret(truth_tab, policy, optimal.values);
      rec.planned_value_gap =
          initial_value(agent->planned_values(), truth_tab.initial_distribution) - optimal_value;

      const bool need_family = config.audit.width || config.audit.coverage;
      std::optional<ConfidenceFamily> family;
      if (need_family) family = build_family(audit_stats, k, config.agent.delta);
      if (config.audit.coverage) rec.covered = contains(*family, run.truth).contained;

      EpisodeLog log;
      log.reserve(static_cast<Index>(g.horizon));
      FactoredVector state = sample_initial_state(run.truth, sim_rng);
      for (int step = 0; step < g.horizon; ++step) {
        const Index s = truth_tab.state_index(state);
        FactoredVector x = join_state_action(state, truth_tab.action_of(policy.action(s, step)));
        StepOutcome outcome = sample_step(run.truth, x, sim_rng);
        state = outcome.next_state;
        log.push_back({std::move(x), std::move(outcome.rewards), std::move(outcome.next_state)});
      }
      agent->end_episode(log);
      for (const auto& t : log) audit_stats.update(t.x, t.rewards, t.next_state);

      if (config.audit.width) {
        std::tie(rec.width_sum_reward, rec.width_sum_transition) =
            episode_width_sums(*family, log);
      }
      cumulative += rec.regret;
      rec.cumulative_regret = cumulative;
      rec.elapsed_steps = static_cast<double>(k) * g.horizon;
      std::tie(rec.bound_psrl, rec.bound_ucrl) = bound_overlay(
          g, rec.elapsed_steps, config.agent.delta, run.truth_span, run.truth_diameter);
      rec.wall_clock_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
      run.records.push_back(rec);
      run.logs.push_back(std::move(log));
      run.policies.push_back(std::move(policy));
    }
  } catch (const RunError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError(seed, k, e.what());
  }
  return run;
}

/// Runs every seed, up to `config.jobs` at a time; results are in seed order.
inline std::vector<RunResult> run_experiment(const ExperimentConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  std::vector<RunResult> results(config.seeds.size());
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, config.jobs));
  for (std::size_t begin = 0; begin < config.seeds.size(); begin += jobs) {
    const std::size_t end = std::min(config.seeds.size(), begin + jobs);
    if (end - begin == 1) {
      results[begin] = run_single(config, config.seeds[begin]);
      continue;
    }
    std::vector<std::future<RunResult>> batch;
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, run_single, std::cref(config), config.seeds[i]));
    }
    for (std::size_t i = begin; i < end; ++i) results[i] = batch[i - begin].get();
  }
  return results;
}

/// Per-factor visit logs (scoped rows per episode) of a run.
struct FactorVisits {
  std::vector<VisitLog> reward;      // [i]
  std::vector<VisitLog> transition;  // [j]
};

inline FactorVisits factor_visits(const GraphStructure& g, const std::vector<EpisodeLog>& logs) {
  FactorVisits v;
  v.reward.assign(g.num_reward_factors(), VisitLog(logs.size()));
  v.transition.assign(g.num_state_factors(), VisitLog(logs.size()));
  for (std::size_t k = 0; k < logs.size(); ++k) {
    for (const auto& t : logs[k]) {
      for (Index i = 0; i < g.num_reward_factors(); ++i) {
        v.reward[i][k].push_back(scope_row(g, t.x, g.reward_scopes[i]));
      }
      for (Index j = 0; j < g.num_state_factors(); ++j) {
        v.transition[j][k].push_back(scope_row(g, t.x, g.transition_scopes[j]));
      }
    }
  }
  return v;
}

struct FactorWidthCheck {
  FactorKind kind;
  Index factor;
  WidthAudit audit;
};

/// Width-sum inequality for every factor of a logged run, with the radius
/// parameters the run used in each episode.
inline std::vector<FactorWidthCheck> audit_width_sums(const GraphStructure& g,
                                                      const std::vector<EpisodeLog>& logs,
                                                      double delta) {
  const FactorVisits visits = factor_visits(g, logs);
  const std::uint64_t L = logs.size();
  const Index l = g.num_reward_factors();
  const Index m = g.num_state_factors();
  std::vector<FactorWidthCheck> out;
  for (Index i = 0; i < l; ++i) {
    std::vector<double> ds;
    for (std::uint64_t k = 1; k <= L; ++k) {
      ds.push_back(d_reward(k, g.reward_noise, l, g.reward_domain(i), delta));
    }
    const double dT = L > 0 ? ds.back() : 0.0;
    out.push_back({FactorKind::reward, i,
                   width_sum_audit(visits.reward[i], dT, g.reward_domain(i),
                                   class_width_cap(g, FactorKind::reward), g.horizon, ds)});
  }
  for (Index j = 0; j < m; ++j) {
    std::vector<double> ds;
    for (std::uint64_t k = 1; k <= L; ++k) {
      ds.push_back(d_transition(k, g.state_sizes[j], m, g.transition_domain(j), delta));
    }
    const double dT = L > 0 ? ds.back() : 0.0;
    out.push_back({FactorKind::transition, j,
                   width_sum_audit(visits.transition[j], dT, g.transition_domain(j),
                                   class_width_cap(g, FactorKind::transition), g.horizon, ds)});
  }
  return out;
}

/// Whether M* lies in M_k for every episode of a logged run, rebuilding each
/// family from the log. `radius_scale` inflates every radius post hoc.
inline bool covered_throughout(const FactoredMdp& truth, const std::vector<EpisodeLog>& logs,
                               double delta, double radius_scale = 1.0) {
  FactorStats stats(truth.structure);
  for (std::uint64_t k = 1; k <= logs.size(); ++k) {
    ConfidenceFamily family = build_family(stats, k, delta);
    family.radius_scale = radius_scale;
    if (!contains(family, truth).contained) return false;
    for (const auto& t : logs[k - 1]) stats.update(t.x, t.rewards, t.next_state);
  }
  return true;
}

struct CoverageReport {
  std::size_t runs = 0;
  std::size_t covered = 0;
  double fraction = 0.0;
  double standard_error = 0.0;
  double lower_limit = 0.0;  // one-sided Clopper-Pearson at `confidence`
  double confidence = 0.95;
};

inline CoverageReport coverage_report(std::size_t covered, std::size_t runs,
                                      double confidence = 0.95) {
  CoverageReport r;
  r.runs = runs;
  r.covered = covered;
  r.confidence = confidence;
  if (runs == 0) return r;
  const double n = static_cast<double>(runs);
  r.fraction = static_cast<double>(covered) / n;
  r.standard_error = std::sqrt(r.fraction * (1.0 - r.fraction) / n);
  r.lower_limit = covered == 0 ? 0.0
                               : boost::math::ibeta_inv(static_cast<double>(covered),
                                                        n - static_cast<double>(covered) + 1.0,
                                                        1.0 - confidence);
  return r;
}

/// Fraction of runs with M* in M_k for all k, recomputed from the logs.
inline CoverageReport coverage_audit(const std::vector<RunResult>& runs, double delta,
                                     double radius_scale = 1.0) {
  std::size_t covered = 0;
  for (const auto& run : runs) {
    if (covered_throughout(run.truth, run.logs, delta, radius_scale)) ++covered;
  }
  return coverage_report(covered, runs.size());
}

// ---------------------------------------------------------------------------
// On-disk artifacts: run_<seed>.csv, run_<seed>.manifest.json,
// run_<seed>.log.json and run_<seed>.mdp.json.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kCsvHeader =
    "k,delta_k,cum_regret,T,bound_psrl,bound_ucrl,width_sum_reward,width_sum_transition";

inline std::string records_to_csv(const std::vector<EpisodeRecord>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.k) + "," + format_double(r.regret) + "," +
           format_double(r.cumulative_regret) + "," + format_double(r.elapsed_steps) + "," +
           format_double(r.bound_psrl) + "," + format_double(r.bound_ucrl) + "," +
           format_double(r.width_sum_reward) + "," + format_double(r.width_sum_transition) + "\n";
  }
  return out;
}

inline json run_manifest(const ExperimentConfig& config, const RunResult& run) {
  return json{{"library_version", kLibraryVersion},
              {"config_hash", run.config_hash},
              {"seed", run.seed},
              {"config", canonical_config(config)},
              {"episodes", run.records.size()},
              {"delta", run.delta},
              {"truth_span", run.truth_span},
              {"truth_diameter", std::isinf(run.truth_diameter) ? json("inf")
                                                                : json(run.truth_diameter)},
              {"regret", run.regret()},
              {"files",
               {{"csv", "run_" + std::to_string(run.seed) + ".csv"},
                {"log", "run_" + std::to_string(run.seed) + ".log.json"},
                {"mdp", "run_" + std::to_string(run.seed) + ".mdp.json"}}}};
}

inline json logs_to_json(const std::vector<EpisodeLog>& logs) {
  json episodes = json::array();
  for (const auto& log : logs) {
    json steps = json::array();
    for (const auto& t : log) steps.push_back({{"x", t.x}, {"r", t.rewards}, {"s", t.next_state}});
    episodes.push_back(std::move(steps));
  }
  return episodes;
}

inline std::vector<EpisodeLog> logs_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("episodes", "expected an array of episodes");
  std::vector<EpisodeLog> logs;
  for (std::size_t k = 0; k < j.size(); ++k) {
    EpisodeLog log;
    for (const auto& step : j[k]) {
      log.push_back({step.at("x").get<FactoredVector>(), step.at("r").get<std::vector<double>>(),
                     step.at("s").get<FactoredVector>()});
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

/// Writes the artifacts of every run into `dir` (created if missing).
inline void write_run_artifacts(const std::string& dir, const ExperimentConfig& config,
                                const std::vector<RunResult>& runs) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& run : runs) {
    const std::string stem = (fs::path(dir) / ("run_" + std::to_string(run.seed))).string();
    write_text_file(stem + ".csv", records_to_csv(run.records));
    write_text_file(stem + ".manifest.json", run_manifest(config, run).dump(2) + "\n");
    write_text_file(stem + ".log.json",
                    json{{"seed", run.seed},
                         {"delta", run.delta},
                         {"episodes", logs_to_json(run.logs)}}
                            .dump() +
                        "\n");
    write_mdp_file(stem + ".mdp.json", run.truth);
  }
}

}  // namespace frl
