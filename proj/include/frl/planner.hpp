#pragma once

// Exact finite-horizon planning on flattened MDPs and optimistic planning
// over factored confidence families (extended value iteration).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "frl/core.hpp"
#include "frl/estimation.hpp"

namespace frl {

/// Deterministic non-stationary policy mu(s, step), steps 0..horizon-1.
struct Policy {
  Index num_states = 0;
  int horizon = 0;
  std::vector<Index> actions;  // [step * S + s]

  Policy() = default;
  Policy(Index states, int steps) : num_states(states), horizon(steps), actions(states * steps, 0) {}

  Index action(Index s, int step) const { return actions[static_cast<Index>(step) * num_states + s]; }
  Index& action(Index s, int step) { return actions[static_cast<Index>(step) * num_states + s]; }

  bool operator==(const Policy&) const = default;
};

/// V_step(s) for step = 0..horizon; the row at step = horizon is identically 0.
struct ValueTable {
  Index num_states = 0;
  int horizon = 0;
  std::vector<double> values;  // [step * S + s]

  ValueTable() = default;
  ValueTable(Index states, int steps)
      : num_states(states), horizon(steps), values(states * (steps + 1), 0.0) {}

  std::span<const double> at(int step) const {
    return {values.data() + static_cast<Index>(step) * num_states, num_states};
  }
  std::span<double> at(int step) {
    return {values.data() + static_cast<Index>(step) * num_states, num_states};
  }
  double value(int step, Index s) const { return at(step)[s]; }
};

/// Expected value under the initial distribution of the first-step values.
inline double initial_value(const ValueTable& v, std::span<const double> rho) {
  double total = 0.0;
  auto first = v.at(0);
  for (Index s = 0; s < first.size(); ++s) total += rho[s] * first[s];
  return total;
}

inline double dot(std::span<const double> p, std::span<const double> v) {
  double total = 0.0;
  for (Index k = 0; k < p.size(); ++k) total += p[k] * v[k];
  return total;
}

/// R(., a) + P(., a) V for every state.
inline std::vector<double> bellman_backup(const TabularMdp& mdp, Index action,
                                          std::span<const double> v) {
  if (v.size() != mdp.num_states || action >= mdp.num_actions) {
    throw StructureError("bellman_backup: dimension mismatch");
  }
  std::vector<double> out(mdp.num_states);
  for (Index s = 0; s < mdp.num_states; ++s) {
    out[s] = mdp.reward(s, action) + dot(mdp.next(s, action), v);
  }
  return out;
}

struct PlanResult {
  ValueTable values;
  Policy policy;
};

/// Exact backward induction, Gamma(M, epsilon) with epsilon realised as 0.
/// Ties go to the lowest action index.
inline PlanResult value_iteration(const TabularMdp& mdp, double epsilon = 0.0) {
  if (epsilon < 0.0) throw std::invalid_argument("planning accuracy must be nonnegative");
  const Index S = mdp.num_states;
  const Index A = mdp.num_actions;
  PlanResult out{ValueTable(S, mdp.horizon), Policy(S, mdp.horizon)};
  for (int step = mdp.horizon - 1; step >= 0; --step) {
    auto next = out.values.at(step + 1);
    auto cur = out.values.at(step);
    for (Index s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      Index best_a = 0;
      for (Index a = 0; a < A; ++a) {
        const double q = mdp.reward(s, a) + dot(mdp.next(s, a), next);
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      cur[s] = best;
      out.policy.action(s, step) = best_a;
    }
  }
  return out;
}

inline ValueTable policy_value(const TabularMdp& mdp, const Policy& policy) {
  if (policy.num_states != mdp.num_states || policy.horizon != mdp.horizon) {
    throw StructureError("policy dimensions do not match the MDP");
  }
  ValueTable v(mdp.num_states, mdp.horizon);
  for (int step = mdp.horizon - 1; step >= 0; --step) {
    auto next = v.at(step + 1);
    auto cur = v.at(step);
    for (Index s = 0; s < mdp.num_states; ++s) {
      const Index a = policy.action(s, step);
      cur[s] = mdp.reward(s, a) + dot(mdp.next(s, a), next);
    }
  }
  return v;
}

/// Policy evaluation under a time-inhomogeneous model, one TabularMdp per step.
inline ValueTable policy_value(std::span<const TabularMdp> step_models, const Policy& policy) {
  const int H = static_cast<int>(step_models.size());
  if (H != policy.horizon) throw StructureError("one model per step is required");
  ValueTable v(policy.num_states, H);
  for (int step = H - 1; step >= 0; --step) {
    const auto& mdp = step_models[static_cast<Index>(step)];
    auto next = v.at(step + 1);
    auto cur = v.at(step);
    for (Index s = 0; s < policy.num_states; ++s) {
      const Index a = policy.action(s, step);
      cur[s] = mdp.reward(s, a) + dot(mdp.next(s, a), next);
    }
  }
  return v;
}

/// max V - min V
inline double span(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("span of an empty value vector");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

/// argmax p.v over the simplex intersected with the L1 ball of the given
/// radius around p_hat. Mass min(radius/2, 1 - p_hat[best]) moves onto the
/// best outcome and is taken from the worst outcomes first.
inline std::vector<double> optimistic_factor_reallocate(std::span<const double> p_hat,
                                                        double l1_radius,
                                                        std::span<const double> v) {
  if (p_hat.size() != v.size() || p_hat.empty()) {
    throw std::invalid_argument("reallocate: dimension mismatch");
  }
  if (!(l1_radius >= 0.0)) throw std::invalid_argument("reallocate: negative radius");
  std::vector<double> p(p_hat.begin(), p_hat.end());
  const Index best = static_cast<Index>(std::max_element(v.begin(), v.end()) - v.begin());
  const double budget = std::min(l1_radius, 2.0) / 2.0;
  const double added = std::min(budget, 1.0 - p[best]);
  if (!(added > 0.0)) return p;
  p[best] += added;

  std::vector<Index> order(p.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] < v[b]; });
  double excess = added;
  for (Index y : order) {
    if (excess <= 0.0) break;
    if (y == best) continue;
    const double taken = std::min(p[y], excess);
    p[y] -= taken;
    excess -= taken;
  }
  if (added >= 1.0 - p_hat[best]) {
    // All other mass was removed; pin exactly to the vertex.
    std::fill(p.begin(), p.end(), 0.0);
    p[best] = 1.0;
  }
  return p;
}

/// How the inner maximization over a product of per-factor L1 balls is solved.
enum class OptimismMode {
  /// Cycle through the factors, reallocating each against the value
  /// marginalized over the other factors' current rows.
  coordinate_ascent,
  /// Solve exactly over the joint L1 ball of radius sum_j r_j around the
  /// product of centers, which contains the product of balls.
  joint_relaxation,
};

struct ExtendedViOptions {
  int sweeps = 1;
  OptimismMode mode = OptimismMode::coordinate_ascent;
  Index cap = kDefaultDeskCap;
};

/// Greedy policy, optimistic values, and the realisation achieving them. The
/// optimistic choice is made per (x, step), so the realisation is a
/// time-inhomogeneous flat model (one TabularMdp per step).
struct OptimisticPlan {
  Policy policy;
  ValueTable values;
  std::vector<TabularMdp> step_models;
};

namespace detail {

inline std::vector<double> kron_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<double> joint{1.0};
  for (const auto& row : rows) {
    std::vector<double> next(joint.size() * row.size());
    for (Index k = 0; k < joint.size(); ++k) {
      for (Index y = 0; y < row.size(); ++y) next[k * row.size() + y] = joint[k] * row[y];
    }
    joint = std::move(next);
  }
  return joint;
}

/// Value of outcome y of factor j, averaging over the other factors' rows.
inline std::vector<double> marginal_values(const std::vector<std::vector<double>>& rows, Index j,
                                           std::span<const Index> sizes,
                                           std::span<const double> v) {
  std::vector<double> out(sizes[j], 0.0);
  FactoredVector coords(sizes.size(), 0);
  for (Index s = 0; s < v.size(); ++s) {
    double w = 1.0;
    for (Index i = 0; i < sizes.size() && w != 0.0; ++i) {
      if (i != j) w *= rows[i][coords[i]];
    }
    out[coords[j]] += w * v[s];
    for (Index i = sizes.size(); i-- > 0;) {
      if (++coords[i] < sizes[i]) break;
      coords[i] = 0;
    }
  }
  return out;
}

}  // namespace detail

inline OptimisticPlan extended_value_iteration(const ConfidenceFamily& family,
                                               const ExtendedViOptions& options = {}) {
  const auto& g = family.structure();
  const Index S = g.num_states();
  const Index A = g.num_actions();
  if (A != 0 && S > options.cap / A) {
    throw SizeError("flattened size |S|*|A| = " + std::to_string(S) + "*" + std::to_string(A) +
                    " exceeds the desk-scale cap " + std::to_string(options.cap));
  }
  const Index m = g.num_state_factors();
  const Index l = g.num_reward_factors();
  const double C = g.reward_bound;
  const int H = g.horizon;

  // Per-factor centers and radii addressed by row.
  std::vector<std::vector<double>> reward_opt(l);
  for (Index i = 0; i < l; ++i) {
    for (Index z = 0; z < g.reward_domain(i); ++z) {
      const double r = family.reward_radius(i, z);
      const double upper = std::isinf(r) ? C : family.reward_center(i, z) + r;
      reward_opt[i].push_back(std::clamp(upper, 0.0, C));
    }
  }
  std::vector<std::vector<std::vector<double>>> centers(m);
  std::vector<std::vector<double>> radii(m);
  for (Index j = 0; j < m; ++j) {
    for (Index z = 0; z < g.transition_domain(j); ++z) {
      centers[j].push_back(family.transition_center(j, z));
      radii[j].push_back(family.transition_radius(j, z));
    }
  }

  OptimisticPlan out{Policy(S, H), ValueTable(S, H), {}};
  out.step_models.resize(static_cast<Index>(H));
  for (auto& model : out.step_models) {
    model.num_states = S;
    model.num_actions = A;
    model.horizon = H;
    model.state_sizes = g.state_sizes;
    model.action_sizes = g.action_sizes;
    model.expected_reward.assign(S * A, 0.0);
    model.transitions.assign(S * A * S, 0.0);
  }

  std::vector<FactoredVector> states(S);
  for (Index s = 0; s < S; ++s) states[s] = mixed_radix_unindex(s, g.state_sizes);
  std::vector<FactoredVector> actions(A);
  for (Index a = 0; a < A; ++a) actions[a] = mixed_radix_unindex(a, g.action_sizes);

  std::vector<std::vector<double>> rows(m);
  for (int step = H - 1; step >= 0; --step) {
    auto next_v = out.values.at(step + 1);
    auto cur = out.values.at(step);
    auto& model = out.step_models[static_cast<Index>(step)];
    for (Index s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      Index best_a = 0;
      for (Index a = 0; a < A; ++a) {
        const FactoredVector x = join_state_action(states[s], actions[a]);
        double reward = 0.0;
        for (Index i = 0; i < l; ++i) reward += reward_opt[i][scope_row(g, x, g.reward_scopes[i])];

        std::vector<double> joint;
        if (options.mode == OptimismMode::coordinate_ascent) {
          std::vector<Index> zs(m);
          for (Index j = 0; j < m; ++j) {
            zs[j] = scope_row(g, x, g.transition_scopes[j]);
            rows[j] = centers[j][zs[j]];
          }
          for (int sweep = 0; sweep < options.sweeps; ++sweep) {
            for (Index j = 0; j < m; ++j) {
              const auto marginal = detail::marginal_values(rows, j, g.state_sizes, next_v);
              rows[j] = optimistic_factor_reallocate(centers[j][zs[j]], radii[j][zs[j]], marginal);
            }
          }
          joint = detail::kron_rows(rows);
        } else {
          double total_radius = 0.0;
          for (Index j = 0; j < m; ++j) {
            const Index z = scope_row(g, x, g.transition_scopes[j]);
            rows[j] = centers[j][z];
            total_radius += radii[j][z];
          }
          joint = optimistic_factor_reallocate(detail::kron_rows(rows), total_radius, next_v);
        }

        const double q = reward + dot(joint, next_v);
        model.expected_reward[s * A + a] = reward;
        std::copy(joint.begin(), joint.end(), model.next(s, a).begin());
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      cur[s] = best;
      out.policy.action(s, step) = best_a;
    }
  }
  return out;
}

}  // namespace frl
