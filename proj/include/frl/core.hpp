#pragma once

// Factored-set arithmetic, the factored MDP representation, sampling and
// flattening to a tabular MDP.
//
// Conventions used throughout the library:
//  * X = S x A is a factored set whose first m factors are the state factors
//    and whose remaining factors are action factors.
//  * Scopes are ascending, duplicate-free lists of 0-based indices into X.
//  * Every factor table is addressed with a row-major mixed-radix index: the
//    first coordinate of a scoped value is the most significant digit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace frl {

using Index = std::size_t;
using FactoredVector = std::vector<Index>;
using Scope = std::vector<Index>;
using Rng = std::mt19937_64;

inline constexpr Index kDefaultDeskCap = 1'000'000;
inline constexpr double kProbabilityTolerance = 1e-9;

/// Malformed structure, scope or coordinate.
class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A flattened size exceeds the configured desk-scale cap.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Independent random stream derived from a master seed.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

/// Product of radices; throws SizeError on overflow.
inline Index checked_product(std::span<const Index> sizes) {
  Index product = 1;
  for (Index size : sizes) {
    if (size != 0 && product > std::numeric_limits<Index>::max() / size) {
      throw SizeError("factored set size overflows");
    }
    product *= size;
  }
  return product;
}

inline FactoredVector scope_project(std::span<const Index> x, const Scope& scope) {
  FactoredVector out;
  out.reserve(scope.size());
  for (std::size_t k = 0; k < scope.size(); ++k) {
    if (scope[k] >= x.size()) {
      throw StructureError("scope index " + std::to_string(scope[k]) + " out of range for " +
                           std::to_string(x.size()) + " factors");
    }
    if (k > 0 && scope[k] <= scope[k - 1]) {
      throw StructureError("scope must be strictly ascending");
    }
    out.push_back(x[scope[k]]);
  }
  return out;
}

inline Index mixed_radix_index(std::span<const Index> values, std::span<const Index> radices) {
  if (values.size() != radices.size()) {
    throw StructureError("coordinate count does not match radix count");
  }
  Index flat = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] >= radices[k]) {
      throw StructureError("coordinate " + std::to_string(k) + " = " + std::to_string(values[k]) +
                           " out of range [0, " + std::to_string(radices[k]) + ")");
    }
    flat = flat * radices[k] + values[k];
  }
  return flat;
}

inline FactoredVector mixed_radix_unindex(Index flat, std::span<const Index> radices) {
  FactoredVector values(radices.size());
  for (std::size_t k = radices.size(); k-- > 0;) {
    values[k] = flat % radices[k];
    flat /= radices[k];
  }
  if (flat != 0) {
    throw StructureError("flat index out of range for radices");
  }
  return values;
}

/// The graph structure G: factor sizes, scopes, horizon and reward class.
struct GraphStructure {
  std::vector<Index> state_sizes;
  std::vector<Index> action_sizes;
  std::vector<Scope> reward_scopes;
  std::vector<Scope> transition_scopes;
  int horizon = 1;
  double reward_bound = 1.0;  // C
  double reward_noise = 0.0;  // sigma

  Index num_state_factors() const { return state_sizes.size(); }
  Index num_action_factors() const { return action_sizes.size(); }
  Index num_factors() const { return state_sizes.size() + action_sizes.size(); }
  Index num_reward_factors() const { return reward_scopes.size(); }

  Index factor_size(Index i) const {
    return i < state_sizes.size() ? state_sizes[i] : action_sizes.at(i - state_sizes.size());
  }

  std::vector<Index> factor_sizes() const {
    std::vector<Index> sizes(state_sizes);
    sizes.insert(sizes.end(), action_sizes.begin(), action_sizes.end());
    return sizes;
  }

  std::vector<Index> scope_radices(const Scope& scope) const {
    std::vector<Index> radices;
    radices.reserve(scope.size());
    for (Index i : scope) {
      if (i >= num_factors()) {
        throw StructureError("scope index " + std::to_string(i) + " out of range");
      }
      radices.push_back(factor_size(i));
    }
    return radices;
  }

  /// |X[Z]|
  Index domain_size(const Scope& scope) const { return checked_product(scope_radices(scope)); }
  Index reward_domain(Index i) const { return domain_size(reward_scopes.at(i)); }
  Index transition_domain(Index j) const { return domain_size(transition_scopes.at(j)); }

  Index num_states() const { return checked_product(state_sizes); }
  Index num_actions() const { return checked_product(action_sizes); }

  /// Every structural invariant that fails, as human-readable messages.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    const Index n = num_factors();
    for (Index i = 0; i < n; ++i) {
      if (factor_size(i) == 0) out.push_back("factor " + std::to_string(i) + " has size 0");
    }
    auto check_scopes = [&](const std::vector<Scope>& scopes, const char* kind) {
      for (std::size_t k = 0; k < scopes.size(); ++k) {
        const Scope& z = scopes[k];
        for (std::size_t p = 0; p < z.size(); ++p) {
          if (z[p] >= n) {
            out.push_back(std::string(kind) + " scope " + std::to_string(k) + " index " +
                          std::to_string(z[p]) + " out of range");
          }
          if (p > 0 && z[p] <= z[p - 1]) {
            out.push_back(std::string(kind) + " scope " + std::to_string(k) +
                          " is not strictly ascending");
          }
        }
      }
    };
    check_scopes(reward_scopes, "reward");
    check_scopes(transition_scopes, "transition");
    if (state_sizes.empty()) out.push_back("no state factors");
    if (transition_scopes.size() != state_sizes.size()) {
      out.push_back("expected one transition scope per state factor (" +
                    std::to_string(state_sizes.size()) + "), got " +
                    std::to_string(transition_scopes.size()));
    }
    if (horizon < 1) out.push_back("horizon must be >= 1");
    if (!(reward_bound > 0.0) || !std::isfinite(reward_bound)) {
      out.push_back("reward bound C must be positive and finite");
    }
    if (!(reward_noise >= 0.0) || !std::isfinite(reward_noise)) {
      out.push_back("reward noise sigma must be nonnegative and finite");
    }
    if (out.empty()) {
      try {
        num_states();
        num_actions();
        checked_product(factor_sizes());
      } catch (const SizeError& e) {
        out.push_back(e.what());
      }
    }
    return out;
  }

  void check() const {
    auto v = violations();
    if (!v.empty()) throw StructureError("invalid graph structure: " + v.front());
  }

  bool operator==(const GraphStructure&) const = default;
};

inline Index scope_index(std::span<const Index> scoped, const Scope& scope,
                         const GraphStructure& structure) {
  return mixed_radix_index(scoped, structure.scope_radices(scope));
}

inline FactoredVector scope_unindex(Index flat, const Scope& scope,
                                    const GraphStructure& structure) {
  return mixed_radix_unindex(flat, structure.scope_radices(scope));
}

/// Row of a factor table addressed by x[Z], without materialising x[Z].
inline Index scope_row(const GraphStructure& structure, std::span<const Index> x,
                       const Scope& scope) {
  Index flat = 0;
  for (Index i : scope) {
    const Index radix = structure.factor_size(i);
    if (i >= x.size() || x[i] >= radix) throw StructureError("coordinate out of range");
    flat = flat * radix + x[i];
  }
  return flat;
}

/// Row-major table of probability vectors.
struct ProbabilityTable {
  Index rows = 0;
  Index outcomes = 0;
  std::vector<double> data;

  ProbabilityTable() = default;
  ProbabilityTable(Index rows_, Index outcomes_, double fill = 0.0)
      : rows(rows_), outcomes(outcomes_), data(rows_ * outcomes_, fill) {}

  std::span<double> row(Index z) { return {data.data() + z * outcomes, outcomes}; }
  std::span<const double> row(Index z) const { return {data.data() + z * outcomes, outcomes}; }

  bool operator==(const ProbabilityTable&) const = default;
};

/// The factored MDP tuple: structure, per-factor reward means and
/// transition tables, and the initial distribution over flattened S.
struct FactoredMdp {
  GraphStructure structure;
  std::vector<std::vector<double>> reward_means;  // [i][row of X[Z^R_i]]
  std::vector<ProbabilityTable> transitions;      // [j], rows X[Z^P_j], outcomes S_j
  std::vector<double> initial_distribution;

  bool operator==(const FactoredMdp&) const = default;
};

/// x = (s, a) as a factored vector over X.
inline FactoredVector join_state_action(std::span<const Index> state,
                                        std::span<const Index> action) {
  FactoredVector x(state.begin(), state.end());
  x.insert(x.end(), action.begin(), action.end());
  return x;
}

inline double transition_prob(const FactoredMdp& mdp, std::span<const Index> x,
                              std::span<const Index> next_state) {
  const auto& g = mdp.structure;
  if (next_state.size() != g.num_state_factors()) {
    throw StructureError("next state has wrong number of factors");
  }
  double p = 1.0;
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    const Index z = scope_row(g, x, g.transition_scopes[j]);
    if (next_state[j] >= g.state_sizes[j]) throw StructureError("next state out of range");
    p *= mdp.transitions[j].row(z)[next_state[j]];
  }
  return p;
}

inline double expected_reward(const FactoredMdp& mdp, std::span<const Index> x) {
  const auto& g = mdp.structure;
  double total = 0.0;
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    total += mdp.reward_means[i][scope_row(g, x, g.reward_scopes[i])];
  }
  return total;
}

/// Inverse-CDF draw from a probability vector.
inline Index sample_categorical(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cumulative = 0.0;
  Index last_positive = 0;
  for (Index y = 0; y < probs.size(); ++y) {
    if (probs[y] > 0.0) {
      cumulative += probs[y];
      last_positive = y;
      if (u < cumulative) return y;
    }
  }
  return last_positive;
}

struct StepOutcome {
  std::vector<double> rewards;  // one per reward factor
  double total_reward = 0.0;
  FactoredVector next_state;
};

inline StepOutcome sample_step(const FactoredMdp& mdp, std::span<const Index> x, Rng& rng) {
  const auto& g = mdp.structure;
  StepOutcome out;
  out.rewards.reserve(g.num_reward_factors());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    const double mean = mdp.reward_means[i][scope_row(g, x, g.reward_scopes[i])];
    const double r = g.reward_noise > 0.0 ? mean + g.reward_noise * noise(rng) : mean;
    out.rewards.push_back(r);
    out.total_reward += r;
  }
  out.next_state.resize(g.num_state_factors());
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    const Index z = scope_row(g, x, g.transition_scopes[j]);
    out.next_state[j] = sample_categorical(mdp.transitions[j].row(z), rng);
  }
  return out;
}

inline FactoredVector sample_initial_state(const FactoredMdp& mdp, Rng& rng) {
  const Index s = sample_categorical(mdp.initial_distribution, rng);
  return mixed_radix_unindex(s, mdp.structure.state_sizes);
}

/// Flat MDP (S, A, R, P, tau, rho) with the index maps back to factors.
struct TabularMdp {
  Index num_states = 0;
  Index num_actions = 0;
  int horizon = 1;
  std::vector<double> expected_reward;  // [s * A + a]
  std::vector<double> transitions;      // [(s * A + a) * S + s']
  std::vector<double> initial_distribution;
  std::vector<Index> state_sizes;
  std::vector<Index> action_sizes;

  double reward(Index s, Index a) const { return expected_reward[s * num_actions + a]; }
  std::span<const double> next(Index s, Index a) const {
    return {transitions.data() + (s * num_actions + a) * num_states, num_states};
  }
  std::span<double> next(Index s, Index a) {
    return {transitions.data() + (s * num_actions + a) * num_states, num_states};
  }

  FactoredVector state_of(Index s) const { return mixed_radix_unindex(s, state_sizes); }
  FactoredVector action_of(Index a) const { return mixed_radix_unindex(a, action_sizes); }
  Index state_index(std::span<const Index> s) const { return mixed_radix_index(s, state_sizes); }
  Index action_index(std::span<const Index> a) const {
    return mixed_radix_index(a, action_sizes);
  }
};

/// Joint next-state distribution of x as a Kronecker product of the factor
/// rows, in the flattened state order.
inline std::vector<double> joint_next_distribution(const FactoredMdp& mdp,
                                                   std::span<const Index> x) {
  const auto& g = mdp.structure;
  std::vector<double> joint{1.0};
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    auto row = mdp.transitions[j].row(scope_row(g, x, g.transition_scopes[j]));
    std::vector<double> next(joint.size() * row.size());
    for (Index k = 0; k < joint.size(); ++k) {
      for (Index y = 0; y < row.size(); ++y) next[k * row.size() + y] = joint[k] * row[y];
    }
    joint = std::move(next);
  }
  return joint;
}

inline TabularMdp flatten(const FactoredMdp& mdp, Index cap = kDefaultDeskCap) {
  const auto& g = mdp.structure;
  const Index S = g.num_states();
  const Index A = g.num_actions();
  if (A != 0 && S > cap / A) {
    throw SizeError("flattened size |S|*|A| = " + std::to_string(S) + "*" + std::to_string(A) +
                    " exceeds the desk-scale cap " + std::to_string(cap));
  }
  TabularMdp out;
  out.num_states = S;
  out.num_actions = A;
  out.horizon = g.horizon;
  out.state_sizes = g.state_sizes;
  out.action_sizes = g.action_sizes;
  out.initial_distribution = mdp.initial_distribution;
  out.expected_reward.resize(S * A);
  out.transitions.resize(S * A * S);
  for (Index s = 0; s < S; ++s) {
    const FactoredVector state = mixed_radix_unindex(s, g.state_sizes);
    for (Index a = 0; a < A; ++a) {
      const FactoredVector x = join_state_action(state, mixed_radix_unindex(a, g.action_sizes));
      out.expected_reward[s * A + a] = expected_reward(mdp, x);
      const auto joint = joint_next_distribution(mdp, x);
      std::copy(joint.begin(), joint.end(), out.next(s, a).begin());
    }
  }
  return out;
}

struct Violation {
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks every invariant of a factored MDP and reports all failures.
inline ValidationReport validate(const FactoredMdp& mdp) {
  ValidationReport report;
  auto add = [&](std::string msg) { report.violations.push_back({std::move(msg)}); };
  const auto& g = mdp.structure;
  for (auto& msg : g.violations()) add("structure: " + msg);
  if (!report.ok()) return report;

  const double C = g.reward_bound;
  if (mdp.reward_means.size() != g.num_reward_factors()) {
    add("expected " + std::to_string(g.num_reward_factors()) + " reward tables, got " +
        std::to_string(mdp.reward_means.size()));
  } else {
    for (Index i = 0; i < g.num_reward_factors(); ++i) {
      const Index rows = g.reward_domain(i);
      if (mdp.reward_means[i].size() != rows) {
        add("reward factor " + std::to_string(i) + ": expected " + std::to_string(rows) +
            " rows, got " + std::to_string(mdp.reward_means[i].size()));
        continue;
      }
      for (Index z = 0; z < rows; ++z) {
        const double mean = mdp.reward_means[i][z];
        if (!(mean >= 0.0 && mean <= C)) {
          std::ostringstream os;
          os << "reward factor " << i << " row " << z << ": mean " << mean
             << " outside [0, C] with C = " << C;
          add(os.str());
        }
      }
    }
  }

  if (mdp.transitions.size() != g.num_state_factors()) {
    add("expected " + std::to_string(g.num_state_factors()) + " transition tables, got " +
        std::to_string(mdp.transitions.size()));
  } else {
    for (Index j = 0; j < g.num_state_factors(); ++j) {
      const auto& table = mdp.transitions[j];
      const Index rows = g.transition_domain(j);
      if (table.rows != rows || table.outcomes != g.state_sizes[j] ||
          table.data.size() != rows * g.state_sizes[j]) {
        add("transition factor " + std::to_string(j) + ": table shape does not match structure");
        continue;
      }
      for (Index z = 0; z < rows; ++z) {
        double sum = 0.0;
        bool negative = false;
        for (double p : table.row(z)) {
          sum += p;
          negative = negative || !(p >= 0.0);
        }
        if (negative) {
          add("transition factor " + std::to_string(j) + " row " + std::to_string(z) +
              ": negative or non-finite entry");
        }
        if (!(std::abs(sum - 1.0) <= kProbabilityTolerance)) {
          std::ostringstream os;
          os << "transition factor " << j << " row " << z << ": sums to " << sum;
          add(os.str());
        }
      }
    }
  }

  Index S = g.num_states();
  if (mdp.initial_distribution.size() != S) {
    add("initial distribution has " + std::to_string(mdp.initial_distribution.size()) +
        " entries, expected " + std::to_string(S));
  } else {
    double sum = 0.0;
    bool negative = false;
    for (double p : mdp.initial_distribution) {
      sum += p;
      negative = negative || !(p >= 0.0);
    }
    if (negative) add("initial distribution: negative or non-finite entry");
    if (!(std::abs(sum - 1.0) <= kProbabilityTolerance)) {
      std::ostringstream os;
      os << "initial distribution sums to " << sum;
      add(os.str());
    }
  }
  return report;
}

}  // namespace frl
