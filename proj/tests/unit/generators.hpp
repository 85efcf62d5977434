#pragma once

// Hand-rolled random generators for property tests.

#include <algorithm>
#include <random>
#include <vector>

#include "frl/core.hpp"

namespace frl::testing {

struct StructureLimits {
  Index max_state_factors = 3;
  Index max_action_factors = 2;
  Index max_factor_size = 3;
  Index max_reward_factors = 2;
  Index max_scope = 2;
  int max_horizon = 3;
  Index max_state_actions = 64;
  double reward_bound = 1.0;
  double reward_noise = 0.5;
};

inline Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

/// Nonempty ascending subset of {0..n-1} with at most `max_size` entries.
inline Scope random_scope(Rng& rng, Index n, Index max_size) {
  std::vector<Index> all(n);
  for (Index i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  const Index size = uniform_index(rng, 1, std::min(n, max_size));
  Scope z(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size));
  std::sort(z.begin(), z.end());
  return z;
}

inline GraphStructure random_structure(Rng& rng, const StructureLimits& lim = {}) {
  for (;;) {
    GraphStructure g;
    const Index m = uniform_index(rng, 1, lim.max_state_factors);
    const Index a = uniform_index(rng, 1, lim.max_action_factors);
    for (Index j = 0; j < m; ++j) g.state_sizes.push_back(uniform_index(rng, 1, lim.max_factor_size));
    for (Index j = 0; j < a; ++j) g.action_sizes.push_back(uniform_index(rng, 1, lim.max_factor_size));
    if (g.num_states() * g.num_actions() > lim.max_state_actions) continue;
    const Index n = m + a;
    const Index l = uniform_index(rng, 1, lim.max_reward_factors);
    for (Index i = 0; i < l; ++i) g.reward_scopes.push_back(random_scope(rng, n, lim.max_scope));
    for (Index j = 0; j < m; ++j) g.transition_scopes.push_back(random_scope(rng, n, lim.max_scope));
    g.horizon = static_cast<int>(uniform_index(rng, 1, static_cast<Index>(lim.max_horizon)));
    g.reward_bound = lim.reward_bound;
    g.reward_noise = lim.reward_noise;
    return g;
  }
}

/// Random probability vector; with `sparse` some entries are exactly zero.
inline std::vector<double> random_simplex(Rng& rng, Index size, bool sparse = false) {
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution drop(0.3);
  std::vector<double> p(size);
  double total = 0.0;
  for (auto& v : p) {
    v = (sparse && drop(rng)) ? 0.0 : expo(rng);
    total += v;
  }
  if (total == 0.0) {
    p[uniform_index(rng, 0, size - 1)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

inline FactoredMdp random_mdp(const GraphStructure& g, Rng& rng, bool sparse = false) {
  FactoredMdp mdp;
  mdp.structure = g;
  std::uniform_real_distribution<double> unif(0.0, g.reward_bound);
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    std::vector<double> means(g.reward_domain(i));
    for (auto& v : means) v = unif(rng);
    mdp.reward_means.push_back(means);
  }
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    ProbabilityTable table(g.transition_domain(j), g.state_sizes[j]);
    for (Index z = 0; z < table.rows; ++z) {
      auto p = random_simplex(rng, g.state_sizes[j], sparse);
      std::copy(p.begin(), p.end(), table.row(z).begin());
    }
    mdp.transitions.push_back(table);
  }
  mdp.initial_distribution = random_simplex(rng, g.num_states());
  return mdp;
}

inline FactoredVector random_vector(Rng& rng, const std::vector<Index>& sizes) {
  FactoredVector x;
  for (Index s : sizes) x.push_back(uniform_index(rng, 0, s - 1));
  return x;
}

}  // namespace frl::testing
