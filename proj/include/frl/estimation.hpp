#pragma once

// Per-factor empirical estimates, confidence radii and widths, and the
// concentration inequalities used to audit them.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "frl/core.hpp"

namespace frl {

using Count = std::uint64_t;

enum class FactorKind { reward, transition };

inline const char* to_string(FactorKind kind) {
  return kind == FactorKind::reward ? "reward" : "transition";
}

/// Visit counts and sufficient statistics for every factor row.
struct FactorStats {
  GraphStructure structure;
  std::vector<std::vector<Count>> reward_counts;      // [i][z]
  std::vector<std::vector<double>> reward_sums;       // [i][z]
  std::vector<std::vector<Count>> transition_counts;  // [j][z]
  std::vector<std::vector<Count>> outcome_counts;     // [j][z * |S_j| + y]

  FactorStats() = default;
  explicit FactorStats(const GraphStructure& g) : structure(g) {
    for (Index i = 0; i < g.num_reward_factors(); ++i) {
      reward_counts.emplace_back(g.reward_domain(i), 0);
      reward_sums.emplace_back(g.reward_domain(i), 0.0);
    }
    for (Index j = 0; j < g.num_state_factors(); ++j) {
      transition_counts.emplace_back(g.transition_domain(j), 0);
      outcome_counts.emplace_back(g.transition_domain(j) * g.state_sizes[j], 0);
    }
  }

  void update(std::span<const Index> x, std::span<const double> rewards,
              std::span<const Index> next_state) {
    const auto& g = structure;
    if (rewards.size() != g.num_reward_factors() ||
        next_state.size() != g.num_state_factors() || x.size() != g.num_factors()) {
      throw StructureError("observation does not match the graph structure");
    }
    for (Index i = 0; i < g.num_reward_factors(); ++i) {
      const Index z = scope_row(g, x, g.reward_scopes[i]);
      reward_counts[i][z] += 1;
      reward_sums[i][z] += rewards[i];
    }
    for (Index j = 0; j < g.num_state_factors(); ++j) {
      const Index z = scope_row(g, x, g.transition_scopes[j]);
      if (next_state[j] >= g.state_sizes[j]) throw StructureError("next state out of range");
      transition_counts[j][z] += 1;
      outcome_counts[j][z * g.state_sizes[j] + next_state[j]] += 1;
    }
  }

  bool operator==(const FactorStats&) const = default;
};

/// Empirical row f_hat(z); nullopt when the row has no data.
inline std::optional<std::vector<double>> empirical_transition(const FactorStats& stats, Index j,
                                                               Index z) {
  const Count n = stats.transition_counts.at(j).at(z);
  if (n == 0) return std::nullopt;
  const Index S = stats.structure.state_sizes[j];
  std::vector<double> row(S);
  for (Index y = 0; y < S; ++y) {
    row[y] = static_cast<double>(stats.outcome_counts[j][z * S + y]) / static_cast<double>(n);
  }
  return row;
}

inline std::optional<double> empirical_reward(const FactorStats& stats, Index i, Index z) {
  const Count n = stats.reward_counts.at(i).at(z);
  if (n == 0) return std::nullopt;
  return stats.reward_sums[i][z] / static_cast<double>(n);
}

namespace detail {
inline void check_radius_args(std::uint64_t k, Index domain_size, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("confidence delta must lie in (0, 1), got " +
                                std::to_string(delta));
  }
  if (k < 1) throw std::invalid_argument("episode index k must be >= 1");
  if (domain_size < 1) throw std::invalid_argument("domain size must be >= 1");
}
}  // namespace detail

/// d_t^{R_i} = 4 sigma^2 ln(4 l |X[Z^R_i]| k / delta)
inline double d_reward(std::uint64_t k, double sigma, Index num_reward_factors, Index domain_size,
                       double delta) {
  detail::check_radius_args(k, domain_size, delta);
  return 4.0 * sigma * sigma *
         std::log(4.0 * static_cast<double>(num_reward_factors) *
                  static_cast<double>(domain_size) * static_cast<double>(k) / delta);
}

/// d_t^{P_j} = 4 |S_j| ln(4 m |X[Z^P_j]| k / delta)
inline double d_transition(std::uint64_t k, Index outcome_count, Index num_transition_factors,
                           Index domain_size, double delta) {
  detail::check_radius_args(k, domain_size, delta);
  return 4.0 * static_cast<double>(outcome_count) *
         std::log(4.0 * static_cast<double>(num_transition_factors) *
                  static_cast<double>(domain_size) * static_cast<double>(k) / delta);
}

/// sqrt(d / n); n = 0 is a null constraint and yields +infinity.
inline double radius(double d, Count n) {
  if (n == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(d / static_cast<double>(n));
}

/// The confidence set M_k: per-factor centers, counts frozen at the episode
/// start, and the radius parameters for episode k.
struct ConfidenceFamily {
  FactorStats stats;
  std::uint64_t episode = 1;
  double delta = 0.1;
  std::vector<double> reward_d;
  std::vector<double> transition_d;
  double radius_scale = 1.0;  // post-hoc inflation for audits

  const GraphStructure& structure() const { return stats.structure; }

  double reward_radius(Index i, Index z) const {
    return radius_scale * radius(reward_d.at(i), stats.reward_counts.at(i).at(z));
  }
  double transition_radius(Index j, Index z) const {
    return radius_scale * radius(transition_d.at(j), stats.transition_counts.at(j).at(z));
  }

  /// Empirical mean, 0 for unvisited rows (their radius is unbounded).
  double reward_center(Index i, Index z) const {
    return empirical_reward(stats, i, z).value_or(0.0);
  }

  /// Empirical row, uniform for unvisited rows (their radius is unbounded).
  std::vector<double> transition_center(Index j, Index z) const {
    if (auto row = empirical_transition(stats, j, z)) return *row;
    const Index S = structure().state_sizes[j];
    return std::vector<double>(S, 1.0 / static_cast<double>(S));
  }
};

inline ConfidenceFamily build_family(const FactorStats& stats, std::uint64_t k, double delta) {
  const auto& g = stats.structure;
  ConfidenceFamily family;
  family.stats = stats;
  family.episode = k;
  family.delta = delta;
  const Index l = g.num_reward_factors();
  const Index m = g.num_state_factors();
  for (Index i = 0; i < l; ++i) {
    family.reward_d.push_back(d_reward(k, g.reward_noise, l, g.reward_domain(i), delta));
  }
  for (Index j = 0; j < m; ++j) {
    family.transition_d.push_back(
        d_transition(k, g.state_sizes[j], m, g.transition_domain(j), delta));
  }
  return family;
}

struct ConstraintViolation {
  FactorKind kind;
  Index factor;
  Index row;
  double deviation;
  double radius;
};

struct Containment {
  bool contained = true;
  std::optional<ConstraintViolation> first;
};

inline double l1_distance(std::span<const double> p, std::span<const double> q) {
  double d = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) d += std::abs(p[y] - q[y]);
  return d;
}

/// Whether M satisfies every visited-row constraint of the family.
inline Containment contains(const ConfidenceFamily& family, const FactoredMdp& mdp) {
  const auto& g = family.structure();
  if (!(mdp.structure == g)) {
    throw StructureError("MDP structure does not match the confidence family");
  }
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    for (Index z = 0; z < g.reward_domain(i); ++z) {
      auto center = empirical_reward(family.stats, i, z);
      if (!center) continue;
      const double dev = std::abs(mdp.reward_means[i][z] - *center);
      const double r = family.reward_radius(i, z);
      if (dev > r) return {false, ConstraintViolation{FactorKind::reward, i, z, dev, r}};
    }
  }
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    for (Index z = 0; z < g.transition_domain(j); ++z) {
      auto center = empirical_transition(family.stats, j, z);
      if (!center) continue;
      const double dev = l1_distance(mdp.transitions[j].row(z), *center);
      const double r = family.transition_radius(j, z);
      if (dev > r) return {false, ConstraintViolation{FactorKind::transition, j, z, dev, r}};
    }
  }
  return {};
}

/// Diameter of the function class a factor belongs to: C for reward means,
/// 2 for L1 balls of distributions.
inline double class_width_cap(const GraphStructure& g, FactorKind kind) {
  return kind == FactorKind::reward ? g.reward_bound : 2.0;
}

/// Width of a ball-shaped set: twice its radius, capped at the class diameter.
inline double ball_width(double radius_value, double cap) {
  return std::min(2.0 * radius_value, cap);
}

inline double width(const ConfidenceFamily& family, FactorKind kind, Index factor, Index z) {
  const double r = kind == FactorKind::reward ? family.reward_radius(factor, z)
                                              : family.transition_radius(factor, z);
  return ball_width(r, class_width_cap(family.structure(), kind));
}

/// P(||P* - P_hat||_1 >= eps) <= exp(|Y| ln 2 - n eps^2 / 2), uncapped.
inline double weissman_bound(Index outcome_count, Count n, double eps) {
  return std::exp(static_cast<double>(outcome_count) * std::log(2.0) -
                  static_cast<double>(n) * eps * eps / 2.0);
}

/// P(|mean of n sub-Gaussian(sigma) noises| > beta) <= exp(ln 2 - n beta^2 / (2 sigma^2)).
inline double subgaussian_tail_bound(Count n, double beta, double sigma) {
  return std::exp(std::log(2.0) -
                  static_cast<double>(n) * beta * beta / (2.0 * sigma * sigma));
}

/// Right side of the width-sum inequality:
/// 4 (tau C_F |X| + 1) + 4 sqrt(2 d_T |X| T).
inline double width_sum_bound(int horizon, double cap, Index domain_size, double d_final,
                              double total_steps) {
  const double X = static_cast<double>(domain_size);
  return 4.0 * (horizon * cap * X + 1.0) + 4.0 * std::sqrt(2.0 * d_final * X * total_steps);
}

/// Rows of one factor visited at each step of each episode.
using VisitLog = std::vector<std::vector<Index>>;

struct WidthAudit {
  double empirical = 0.0;
  double bound = 0.0;
  std::vector<double> per_episode;
  bool holds() const { return empirical <= bound; }
};

/// Replays a visit log with counts frozen at episode starts and returns both
/// sides of the width-sum inequality. When `d_per_episode` is non-empty,
/// episode k uses its own parameter; otherwise every episode uses d_final.
inline WidthAudit width_sum_audit(const VisitLog& log, double d_final, Index domain_size,
                                  double cap, int horizon,
                                  std::span<const double> d_per_episode = {}) {
  if (!d_per_episode.empty() && d_per_episode.size() != log.size()) {
    throw std::invalid_argument("per-episode d sequence length does not match the log");
  }
  std::vector<Count> counts(domain_size, 0);
  WidthAudit audit;
  double steps = 0.0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    const double d = d_per_episode.empty() ? d_final : d_per_episode[k];
    double sum = 0.0;
    for (Index z : log[k]) {
      if (z >= domain_size) throw StructureError("visit log row out of range");
      sum += ball_width(radius(d, counts[z]), cap);
    }
    for (Index z : log[k]) counts[z] += 1;
    steps += static_cast<double>(log[k].size());
    audit.per_episode.push_back(sum);
    audit.empirical += sum;
  }
  audit.bound = width_sum_bound(horizon, cap, domain_size, d_final, steps);
  return audit;
}

struct LargeRadiusCount {
  Count count = 0;
  double bound = 0.0;
  bool holds() const { return static_cast<double>(count) < bound; }
};

/// Number of episode-steps whose frozen-count radius sqrt(d_T / n) exceeds
/// eps, against (d_T / (tau eps^2) + 1) 2 tau |X|.
inline LargeRadiusCount large_radius_count(const VisitLog& log, double d_final,
                                           Index domain_size, int horizon, double eps) {
  std::vector<Count> counts(domain_size, 0);
  LargeRadiusCount out;
  for (const auto& episode : log) {
    for (Index z : episode) {
      if (radius(d_final, counts.at(z)) > eps) ++out.count;
    }
    for (Index z : episode) counts[z] += 1;
  }
  out.bound = (d_final / (horizon * eps * eps) + 1.0) * 2.0 * horizon *
              static_cast<double>(domain_size);
  return out;
}

}  // namespace frl
