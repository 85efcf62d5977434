#pragma once

// Closed-form regret bounds for PSRL and UCRL-Factored and the MDP
// connectedness measures they depend on (span and diameter).

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "frl/agents.hpp"
#include "frl/core.hpp"
#include "frl/estimation.hpp"
#include "frl/planner.hpp"

namespace frl {

struct BoundInputs {
  GraphStructure structure;
  double elapsed_steps = 1.0;  // T
  double delta = 0.1;
  double span = 0.0;      // Psi, or E[Psi] for PSRL
  double diameter = 0.0;  // D
  /// The symbol k inside the logarithms. Unset means the episode count
  /// ceil(T / tau); pass K (the factor size) for the other reading.
  std::optional<double> log_k;

  double resolved_k() const {
    return log_k.value_or(std::ceil(elapsed_steps / static_cast<double>(structure.horizon)));
  }

  void check() const {
    structure.check();
    if (!(elapsed_steps >= 1.0)) throw std::domain_error("T must be >= 1");
    if (!(span >= 0.0)) throw std::domain_error("span must be nonnegative");
    if (!(diameter >= 0.0)) throw std::domain_error("diameter must be nonnegative");
    if (log_k && !(*log_k >= 1.0)) throw std::domain_error("k must be >= 1");
  }
};

/// Expected-regret bound for PSRL; requires T > 4.
inline double psrl_regret_bound(const BoundInputs& in) {
  in.check();
  const double T = in.elapsed_steps;
  if (!(T > 4.0)) {
    throw std::domain_error("PSRL bound requires T > 4 (the 4/(T-4) factor), got T = " +
                            std::to_string(T));
  }
  const auto& g = in.structure;
  const double tau = g.horizon;
  const double C = g.reward_bound;
  const double sigma = g.reward_noise;
  const double k = in.resolved_k();
  const double l = static_cast<double>(g.num_reward_factors());
  const double m = static_cast<double>(g.num_state_factors());

  double reward_terms = 0.0;
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    const double X = static_cast<double>(g.reward_domain(i));
    reward_terms += 5.0 * tau * C * X + 12.0 * sigma * std::sqrt(X * T * std::log(4.0 * l * X * k * T));
  }
  double transition_terms = 0.0;
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    const double X = static_cast<double>(g.transition_domain(j));
    const double S = static_cast<double>(g.state_sizes[j]);
    transition_terms += 5.0 * tau * X + 12.0 * std::sqrt(X * S * T * std::log(4.0 * m * X * k * T));
  }
  return reward_terms + 2.0 * std::sqrt(T) + 4.0 +
         in.span * (1.0 + 4.0 / (T - 4.0)) * transition_terms;
}

/// High-probability regret bound for UCRL-Factored. Infinite when D is.
inline double ucrl_regret_bound(const BoundInputs& in) {
  in.check();
  if (!(in.delta > 0.0 && in.delta < 1.0)) {
    throw std::domain_error("delta must lie in (0, 1), got " + std::to_string(in.delta));
  }
  const auto& g = in.structure;
  const double T = in.elapsed_steps;
  const double tau = g.horizon;
  const double C = g.reward_bound;
  const double sigma = g.reward_noise;
  const double k = in.resolved_k();
  const double l = static_cast<double>(g.num_reward_factors());
  const double m = static_cast<double>(g.num_state_factors());
  const double delta = in.delta;

  double reward_terms = 0.0;
  for (Index i = 0; i < g.num_reward_factors(); ++i) {
    const double X = static_cast<double>(g.reward_domain(i));
    reward_terms += 5.0 * tau * C * X +
                    12.0 * sigma * std::sqrt(X * T * std::log(12.0 * l * X * k * T / delta));
  }
  double bound = reward_terms + 2.0 * std::sqrt(T);
  if (in.diameter == 0.0) return bound;
  if (std::isinf(in.diameter)) return std::numeric_limits<double>::infinity();

  double transition_terms = 0.0;
  for (Index j = 0; j < g.num_state_factors(); ++j) {
    const double X = static_cast<double>(g.transition_domain(j));
    const double S = static_cast<double>(g.state_sizes[j]);
    transition_terms +=
        5.0 * tau * X + 12.0 * std::sqrt(X * S * T * std::log(12.0 * m * X * k * T / delta));
  }
  const double CD = C * in.diameter;
  return bound + CD * std::sqrt(2.0 * T * std::log(6.0 / delta)) + CD * transition_terms;
}

/// 15 m tau sqrt(J K T ln(2 m J T)) for the symmetric structure.
inline double corollary_psrl(double m, double tau, double J, double K, double T) {
  return 15.0 * m * tau * std::sqrt(J * K * T * std::log(2.0 * m * J * T));
}

/// 15 m tau sqrt(J K T ln(12 m J T / delta)) for the symmetric structure.
inline double corollary_ucrl(double m, double tau, double J, double K, double T, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("delta must lie in (0, 1)");
  return 15.0 * m * tau * std::sqrt(J * K * T * std::log(12.0 * m * J * T / delta));
}

struct DiameterOptions {
  double tolerance = 1e-9;
  std::size_t max_iterations = 10'000'000;
};

/// max over ordered pairs s != s' of the minimal expected hitting time of s'
/// from s. Infinite when some state cannot reach another.
inline double diameter(const TabularMdp& mdp, const DiameterOptions& options = {}) {
  const Index S = mdp.num_states;
  const Index A = mdp.num_actions;
  if (S <= 1) return 0.0;

  // Reverse support graph for reachability.
  std::vector<std::vector<Index>> predecessors(S);
  for (Index s = 0; s < S; ++s) {
    for (Index a = 0; a < A; ++a) {
      auto row = mdp.next(s, a);
      for (Index t = 0; t < S; ++t) {
        if (row[t] > 0.0) predecessors[t].push_back(s);
      }
    }
  }

  double worst = 0.0;
  std::vector<double> h(S);
  for (Index target = 0; target < S; ++target) {
    std::vector<bool> reaches(S, false);
    std::deque<Index> queue{target};
    reaches[target] = true;
    while (!queue.empty()) {
      const Index t = queue.front();
      queue.pop_front();
      for (Index s : predecessors[t]) {
        if (!reaches[s]) {
          reaches[s] = true;
          queue.push_back(s);
        }
      }
    }
    for (Index s = 0; s < S; ++s) {
      if (!reaches[s]) return std::numeric_limits<double>::infinity();
    }

    // Gauss-Seidel value iteration on h(s) = 1 + min_a sum_t P(t|s,a) h(t).
    std::fill(h.begin(), h.end(), 0.0);
    bool converged = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      double change = 0.0;
      for (Index s = 0; s < S; ++s) {
        if (s == target) continue;
        double best = std::numeric_limits<double>::infinity();
        for (Index a = 0; a < A; ++a) best = std::min(best, 1.0 + dot(mdp.next(s, a), h));
        change = std::max(change, std::abs(best - h[s]));
        h[s] = best;
      }
      if (change < options.tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged) throw std::runtime_error("hitting-time iteration did not converge");
    for (Index s = 0; s < S; ++s) {
      if (s != target) worst = std::max(worst, h[s]);
    }
  }
  return worst;
}

/// Psi(M) = span of the optimal first-step values.
inline double expected_span(const FactoredMdp& mdp, Index cap = kDefaultDeskCap) {
  return span(value_iteration(flatten(mdp, cap)).values.at(0));
}

struct SpanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo estimate of E[Psi] under a posterior (or prior).
inline SpanEstimate expected_span(const FactoredPosterior& posterior, std::size_t samples,
                                  Rng& rng, Index cap = kDefaultDeskCap) {
  if (samples == 0) throw std::invalid_argument("expected_span needs at least one sample");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    const double psi = expected_span(psrl_sample_mdp(posterior, rng), cap);
    sum += psi;
    sum_sq += psi * psi;
  }
  SpanEstimate est;
  est.samples = samples;
  est.mean = sum / static_cast<double>(samples);
  if (samples > 1) {
    const double var = std::max(0.0, (sum_sq - sum * est.mean) / static_cast<double>(samples - 1));
    est.standard_error = std::sqrt(var / static_cast<double>(samples));
  }
  return est;
}

}  // namespace frl
