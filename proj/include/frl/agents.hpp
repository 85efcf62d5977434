#pragma once

// PSRL and UCRL-Factored, their flat (structure-blind) variants, and two
// reference agents used by the harness.

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frl/core.hpp"
#include "frl/estimation.hpp"
#include "frl/planner.hpp"
#include "frl/serialization.hpp"

namespace frl {

/// One observed step: x = (s, a), per-factor rewards, next state.
struct Transition {
  FactoredVector x;
  std::vector<double> rewards;
  FactoredVector next_state;
};

using EpisodeLog = std::vector<Transition>;

struct PriorConfig {
  double alpha0 = 1.0;
  std::optional<double> mu0;  // defaults to C / 2
  std::optional<double> v0;   // defaults to C^2
};

/// Dirichlet posteriors over transition rows and Normal posteriors over
/// reward means (known noise sigma), one per factor row.
struct FactoredPosterior {
  GraphStructure structure;
  double alpha0 = 1.0;
  double mu0 = 0.5;
  double v0 = 1.0;
  std::vector<std::vector<double>> dirichlet;  // [j][z * |S_j| + y]
  std::vector<std::vector<Count>> reward_counts;
  std::vector<std::vector<double>> reward_sums;
  std::vector<double> initial_distribution;  // attached to sampled MDPs

  static FactoredPosterior prior(const GraphStructure& g, const PriorConfig& config = {}) {
    g.check();
    if (!(config.alpha0 > 0.0)) throw std::invalid_argument("Dirichlet alpha0 must be positive");
    FactoredPosterior p;
    p.structure = g;
    p.alpha0 = config.alpha0;
    p.mu0 = config.mu0.value_or(g.reward_bound / 2.0);
    p.v0 = config.v0.value_or(g.reward_bound * g.reward_bound);
    if (!(p.v0 > 0.0)) throw std::invalid_argument("prior variance v0 must be positive");
    for (Index j = 0; j < g.num_state_factors(); ++j) {
      p.dirichlet.emplace_back(g.transition_domain(j) * g.state_sizes[j], config.alpha0);
    }
    for (Index i = 0; i < g.num_reward_factors(); ++i) {
      p.reward_counts.emplace_back(g.reward_domain(i), 0);
      p.reward_sums.emplace_back(g.reward_domain(i), 0.0);
    }
    const Index S = g.num_states();
    p.initial_distribution.assign(S, 1.0 / static_cast<double>(S));
    return p;
  }

  /// Known-variance conjugate update of the reward mean.
  double reward_mean(Index i, Index z) const {
    const double n = static_cast<double>(reward_counts[i][z]);
    const double sigma2 = structure.reward_noise * structure.reward_noise;
    if (n == 0.0) return mu0;
    if (sigma2 == 0.0) return reward_sums[i][z] / n;
    return (mu0 / v0 + reward_sums[i][z] / sigma2) / (1.0 / v0 + n / sigma2);
  }

  double reward_variance(Index i, Index z) const {
    const double n = static_cast<double>(reward_counts[i][z]);
    const double sigma2 = structure.reward_noise * structure.reward_noise;
    if (n == 0.0) return v0;
    if (sigma2 == 0.0) return 0.0;
    return 1.0 / (1.0 / v0 + n / sigma2);
  }

  std::span<const double> dirichlet_row(Index j, Index z) const {
    const Index S = structure.state_sizes[j];
    return {dirichlet[j].data() + z * S, S};
  }
};

/// Adds the outcome counts and per-factor reward observations of a log.
inline FactoredPosterior psrl_update(FactoredPosterior posterior, const EpisodeLog& log) {
  const auto& g = posterior.structure;
  for (const auto& t : log) {
    for (Index j = 0; j < g.num_state_factors(); ++j) {
      const Index z = scope_row(g, t.x, g.transition_scopes[j]);
      posterior.dirichlet[j][z * g.state_sizes[j] + t.next_state.at(j)] += 1.0;
    }
    for (Index i = 0; i < g.num_reward_factors(); ++i) {
      const Index z = scope_row(g, t.x, g.reward_scopes[i]);
      posterior.reward_counts[i][z] += 1;
      posterior.reward_sums[i][z] += t.rewards.at(i);
    }
  }
  return posterior;
}

inline std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (Index y = 0; y < alpha.size(); ++y) {
    std::gamma_distribution<double> gamma(alpha[y], 1.0);
    out[y] = gamma(rng);
    total += out[y];
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed; fall back to the largest parameter.
    std::fill(out.begin(), out.end(), 0.0);
    out[static_cast<Index>(std::max_element(alpha.begin(), alpha.end()) - alpha.begin())] = 1.0;
    return out;
  }
  for (double& p : out) p /= total;
  return out;
}

/// M_k ~ phi(. | H_t); reward means are clipped to [0, C].
inline FactoredMdp psrl_sample_mdp(const FactoredPosterior& posterior, Rng& rng) {
  const auto& g = posterior.structure;
  FactoredMdp mdp;
  mdp.structure = g;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    std::vector<double> means(g.reward_domain(i));
    for (Index z = 0; z < means.size(); ++z) {
      const double draw = posterior.reward_mean(i, z) +
                          std::sqrt(posterior.reward_variance(i, z)) * normal(rng);
      means[z] = std::clamp(draw, 0.0, g.reward_bound);
    }
    mdp.reward_means.push_back(std::move(means));
  }
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    ProbabilityTable table(g.transition_domain(j), g.state_sizes[j]);
    for (Index z = 0; z < table.rows; ++z) {
      auto row = sample_dirichlet(posterior.dirichlet_row(j, z), rng);
      std::copy(row.begin(), row.end(), table.row(z).begin());
    }
    mdp.transitions.push_back(std::move(table));
  }
  mdp.initial_distribution = posterior.initial_distribution;
  return mdp;
}

struct PsrlEpisode {
  Policy policy;
  FactoredMdp sampled;
  ValueTable values;
};

/// Samples M_k and plans exactly on it.
inline PsrlEpisode psrl_episode(const FactoredPosterior& posterior, Rng& rng,
                                Index cap = kDefaultDeskCap) {
  FactoredMdp sampled = psrl_sample_mdp(posterior, rng);
  auto plan = value_iteration(flatten(sampled, cap));
  return {std::move(plan.policy), std::move(sampled), std::move(plan.values)};
}

struct UcrlEpisode {
  Policy policy;
  ConfidenceFamily family;
  OptimisticPlan plan;
};

/// Builds M_k from counts frozen at the episode start and plans optimistically.
inline UcrlEpisode ucrl_episode(const FactorStats& stats, std::uint64_t k, double delta,
                                const ExtendedViOptions& options = {}) {
  ConfidenceFamily family = build_family(stats, k, delta);
  OptimisticPlan plan = extended_value_iteration(family, options);
  Policy policy = plan.policy;
  return {std::move(policy), std::move(family), std::move(plan)};
}

/// Equivalent structure with one state factor (the flattened S), one action
/// factor (the flattened A), and single reward and transition factors whose
/// scopes cover all of X. The summed reward has bound l C and noise
/// sigma sqrt(l).
inline GraphStructure flat_wrap(const GraphStructure& g, Index cap = kDefaultDeskCap) {
  g.check();
  const Index S = g.num_states();
  const Index A = g.num_actions();
  if (A != 0 && S > cap / A) {
    throw SizeError("flat structure |S|*|A| = " + std::to_string(S) + "*" + std::to_string(A) +
                    " exceeds the desk-scale cap " + std::to_string(cap));
  }
  const double l = static_cast<double>(g.num_reward_factors());
  GraphStructure flat;
  flat.state_sizes = {S};
  flat.action_sizes = {A};
  if (g.num_reward_factors() > 0) flat.reward_scopes = {{0, 1}};
  flat.transition_scopes = {{0, 1}};
  flat.horizon = g.horizon;
  flat.reward_bound = l > 0 ? l * g.reward_bound : g.reward_bound;
  flat.reward_noise = g.reward_noise * std::sqrt(std::max(l, 1.0));
  return flat;
}

/// Re-encodes a factored MDP on its flat structure.
inline FactoredMdp flat_encode(const FactoredMdp& mdp, Index cap = kDefaultDeskCap) {
  const TabularMdp tab = flatten(mdp, cap);
  FactoredMdp flat;
  flat.structure = flat_wrap(mdp.structure, cap);
  const Index S = tab.num_states;
  const Index A = tab.num_actions;
  if (flat.structure.num_reward_factors() > 0) flat.reward_means.push_back(tab.expected_reward);
  ProbabilityTable table(S * A, S);
  table.data = tab.transitions;
  flat.transitions.push_back(std::move(table));
  flat.initial_distribution = tab.initial_distribution;
  return flat;
}

/// Maps observations of a factored environment onto its flat structure.
inline Transition flat_observation(const GraphStructure& g, const Transition& t) {
  const Index m = g.num_state_factors();
  std::span<const Index> x(t.x);
  Transition out;
  out.x = {mixed_radix_index(x.first(m), g.state_sizes),
           mixed_radix_index(x.subspan(m), g.action_sizes)};
  if (g.num_reward_factors() > 0) {
    double total = 0.0;
    for (double r : t.rewards) total += r;
    out.rewards = {total};
  }
  out.next_state = {mixed_radix_index(t.next_state, g.state_sizes)};
  return out;
}

enum class Algorithm { psrl, ucrl_factored, psrl_flat, ucrl_flat, oracle, random };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::psrl: return "psrl";
    case Algorithm::ucrl_factored: return "ucrl-factored";
    case Algorithm::psrl_flat: return "psrl-flat";
    case Algorithm::ucrl_flat: return "ucrl-flat";
    case Algorithm::oracle: return "oracle";
    case Algorithm::random: return "random";
  }
  return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(const std::string& tag) {
  for (auto a : {Algorithm::psrl, Algorithm::ucrl_factored, Algorithm::psrl_flat,
                 Algorithm::ucrl_flat, Algorithm::oracle, Algorithm::random}) {
    if (tag == to_string(a)) return a;
  }
  return std::nullopt;
}

inline bool is_flat(Algorithm a) { return a == Algorithm::psrl_flat || a == Algorithm::ucrl_flat; }
inline bool is_ucrl(Algorithm a) {
  return a == Algorithm::ucrl_factored || a == Algorithm::ucrl_flat;
}
inline bool is_psrl(Algorithm a) { return a == Algorithm::psrl || a == Algorithm::psrl_flat; }

struct AgentConfig {
  Algorithm algorithm = Algorithm::psrl;
  double delta = 0.1;
  PriorConfig prior;
  int sweeps = 1;
  OptimismMode optimism = OptimismMode::coordinate_ascent;

  void check() const {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (!(prior.alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
    if (prior.v0 && !(*prior.v0 > 0.0)) throw std::invalid_argument("v0 must be positive");
    if (sweeps < 1) throw std::invalid_argument("sweeps must be >= 1");
  }
};

/// Episodic learner. Policies index the environment's flattened states.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual Policy begin_episode(std::uint64_t k, Rng& rng) = 0;
  virtual void end_episode(const EpisodeLog& log) = 0;
  /// V_1 of the model the agent planned on (sampled or optimistic).
  virtual const ValueTable& planned_values() const = 0;
  virtual json snapshot() const = 0;
  virtual void restore(const json& state) = 0;
};

class PsrlAgent final : public Agent {
 public:
  PsrlAgent(const GraphStructure& env, const AgentConfig& config, Index cap = kDefaultDeskCap)
      : env_(env), flat_(is_flat(config.algorithm)), cap_(cap) {
    posterior_ = FactoredPosterior::prior(flat_ ? flat_wrap(env, cap) : env, config.prior);
  }

  Policy begin_episode(std::uint64_t, Rng& rng) override {
    auto ep = psrl_episode(posterior_, rng, cap_);
    values_ = std::move(ep.values);
    last_sample_ = std::move(ep.sampled);
    return std::move(ep.policy);
  }

  void end_episode(const EpisodeLog& log) override {
    if (!flat_) {
      posterior_ = psrl_update(std::move(posterior_), log);
      return;
    }
    EpisodeLog encoded;
    encoded.reserve(log.size());
    for (const auto& t : log) encoded.push_back(flat_observation(env_, t));
    posterior_ = psrl_update(std::move(posterior_), encoded);
  }

  const ValueTable& planned_values() const override { return values_; }
  const FactoredPosterior& posterior() const { return posterior_; }
  const FactoredMdp& last_sample() const { return last_sample_; }

  json snapshot() const override {
    return json{{"kind", "psrl"},
                {"flat", flat_},
                {"structure", structure_to_json(posterior_.structure)},
                {"alpha0", posterior_.alpha0},
                {"mu0", posterior_.mu0},
                {"v0", posterior_.v0},
                {"dirichlet", posterior_.dirichlet},
                {"reward_counts", posterior_.reward_counts},
                {"reward_sums", posterior_.reward_sums}};
  }

  void restore(const json& state) override {
    if (state.at("kind") != "psrl" || state.at("flat").get<bool>() != flat_) {
      throw SchemaError("kind", "snapshot does not belong to this agent type");
    }
    FactoredPosterior p = posterior_;
    if (!(structure_from_json(state.at("structure")) == p.structure)) {
      throw SchemaError("structure", "snapshot structure does not match");
    }
    p.alpha0 = state.at("alpha0").get<double>();
    p.mu0 = state.at("mu0").get<double>();
    p.v0 = state.at("v0").get<double>();
    p.dirichlet = state.at("dirichlet").get<std::vector<std::vector<double>>>();
    p.reward_counts = state.at("reward_counts").get<std::vector<std::vector<Count>>>();
    p.reward_sums = state.at("reward_sums").get<std::vector<std::vector<double>>>();
    posterior_ = std::move(p);
  }

 private:
  GraphStructure env_;
  bool flat_;
  Index cap_;
  FactoredPosterior posterior_;
  ValueTable values_;
  FactoredMdp last_sample_;
};

class UcrlAgent final : public Agent {
 public:
  UcrlAgent(const GraphStructure& env, const AgentConfig& config, Index cap = kDefaultDeskCap)
      : env_(env),
        flat_(is_flat(config.algorithm)),
        delta_(config.delta),
        options_{config.sweeps, config.optimism, cap},
        stats_(flat_ ? flat_wrap(env, cap) : env) {}

  Policy begin_episode(std::uint64_t k, Rng&) override {
    auto ep = ucrl_episode(stats_, k, delta_, options_);
    values_ = ep.plan.values;
    family_ = std::move(ep.family);
    return std::move(ep.policy);
  }

  void end_episode(const EpisodeLog& log) override {
    for (const auto& t : log) {
      if (flat_) {
        const Transition enc = flat_observation(env_, t);
        stats_.update(enc.x, enc.rewards, enc.next_state);
      } else {
        stats_.update(t.x, t.rewards, t.next_state);
      }
    }
  }

  const ValueTable& planned_values() const override { return values_; }
  const ConfidenceFamily& family() const { return family_; }
  const FactorStats& stats() const { return stats_; }

  json snapshot() const override {
    return json{{"kind", "ucrl"}, {"flat", flat_}, {"delta", delta_}, {"stats", stats_to_json(stats_)}};
  }

  void restore(const json& state) override {
    if (state.at("kind") != "ucrl" || state.at("flat").get<bool>() != flat_) {
      throw SchemaError("kind", "snapshot does not belong to this agent type");
    }
    FactorStats stats = stats_from_json(state.at("stats"));
    if (!(stats.structure == stats_.structure)) {
      throw SchemaError("stats.structure", "snapshot structure does not match");
    }
    delta_ = state.at("delta").get<double>();
    stats_ = std::move(stats);
  }

 private:
  GraphStructure env_;
  bool flat_;
  double delta_;
  ExtendedViOptions options_;
  FactorStats stats_;
  ConfidenceFamily family_;
  ValueTable values_;
};

/// Always plays a fixed policy (the harness passes mu*).
class FixedPolicyAgent final : public Agent {
 public:
  FixedPolicyAgent(Policy policy, ValueTable values)
      : policy_(std::move(policy)), values_(std::move(values)) {}
  Policy begin_episode(std::uint64_t, Rng&) override { return policy_; }
  void end_episode(const EpisodeLog&) override {}
  const ValueTable& planned_values() const override { return values_; }
  json snapshot() const override { return json{{"kind", "fixed"}}; }
  void restore(const json&) override {}

 private:
  Policy policy_;
  ValueTable values_;
};

/// Draws a uniformly random deterministic policy every episode.
class RandomPolicyAgent final : public Agent {
 public:
  RandomPolicyAgent(Index states, Index actions, int horizon)
      : states_(states), actions_(actions), horizon_(horizon), values_(states, horizon) {}
  Policy begin_episode(std::uint64_t, Rng& rng) override {
    Policy p(states_, horizon_);
    std::uniform_int_distribution<Index> pick(0, actions_ - 1);
    for (auto& a : p.actions) a = pick(rng);
    return p;
  }
  void end_episode(const EpisodeLog&) override {}
  const ValueTable& planned_values() const override { return values_; }
  json snapshot() const override { return json{{"kind", "random"}}; }
  void restore(const json&) override {}

 private:
  Index states_;
  Index actions_;
  int horizon_;
  ValueTable values_;
};

}  // namespace frl
