#pragma once

// JSON encodings of structures, factored MDPs and statistics snapshots.
// Doubles are written in shortest round-trip form, so a write/read cycle
// reproduces every value bit for bit.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "frl/core.hpp"
#include "frl/estimation.hpp"

namespace frl {

using json = nlohmann::json;

inline constexpr int kStatsSchemaVersion = 1;

/// A document does not match its schema; `path` names the offending field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline std::string join_path(const std::string& base, std::size_t index) {
  return base + "[" + std::to_string(index) + "]";
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(join_path(path, key), "missing field");
  return *it;
}

inline double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

inline Index as_index(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw SchemaError(path, "expected a nonnegative integer");
  }
  return j.get<Index>();
}

inline std::vector<double> as_doubles(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_double(j[k], join_path(path, k)));
  return out;
}

inline std::vector<Index> as_indices(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of integers");
  std::vector<Index> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_index(j[k], join_path(path, k)));
  return out;
}

template <class T>
std::vector<T> as_count_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  std::vector<T> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if constexpr (std::is_floating_point_v<T>) {
      out.push_back(as_double(j[k], join_path(path, k)));
    } else {
      out.push_back(static_cast<T>(as_index(j[k], join_path(path, k))));
    }
  }
  return out;
}

}  // namespace detail

inline json structure_to_json(const GraphStructure& g) {
  return json{{"state_factor_sizes", g.state_sizes},
              {"action_factor_sizes", g.action_sizes},
              {"reward_scopes", g.reward_scopes},
              {"transition_scopes", g.transition_scopes},
              {"horizon", g.horizon},
              {"reward_bound", g.reward_bound},
              {"reward_noise", g.reward_noise}};
}

inline GraphStructure structure_from_json(const json& j, const std::string& path = "structure") {
  using namespace detail;
  GraphStructure g;
  g.state_sizes = as_indices(require(j, "state_factor_sizes", path),
                             join_path(path, "state_factor_sizes"));
  g.action_sizes = as_indices(require(j, "action_factor_sizes", path),
                              join_path(path, "action_factor_sizes"));
  auto scopes = [&](const char* key) {
    const std::string p = join_path(path, key);
    const json& arr = require(j, key, path);
    if (!arr.is_array()) throw SchemaError(p, "expected an array of scopes");
    std::vector<Scope> out;
    for (std::size_t k = 0; k < arr.size(); ++k) out.push_back(as_indices(arr[k], join_path(p, k)));
    return out;
  };
  g.reward_scopes = scopes("reward_scopes");
  g.transition_scopes = scopes("transition_scopes");
  g.horizon = static_cast<int>(as_index(require(j, "horizon", path), join_path(path, "horizon")));
  g.reward_bound = as_double(require(j, "reward_bound", path), join_path(path, "reward_bound"));
  g.reward_noise = as_double(require(j, "reward_noise", path), join_path(path, "reward_noise"));
  auto v = g.violations();
  if (!v.empty()) throw SchemaError(path, v.front());
  return g;
}

inline json mdp_to_json(const FactoredMdp& mdp) {
  json transitions = json::array();
  for (const auto& table : mdp.transitions) {
    json rows = json::array();
    for (Index z = 0; z < table.rows; ++z) {
      auto row = table.row(z);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transitions.push_back(std::move(rows));
  }
  return json{{"structure", structure_to_json(mdp.structure)},
              {"reward_factors", mdp.reward_means},
              {"transition_factors", std::move(transitions)},
              {"initial_distribution", mdp.initial_distribution}};
}

/// Parses an FMDP document. Shapes are checked here; probability and range
/// invariants are left to validate().
inline FactoredMdp mdp_from_json(const json& j) {
  using namespace detail;
  FactoredMdp mdp;
  mdp.structure = structure_from_json(require(j, "structure", ""), "structure");
  const auto& g = mdp.structure;

  const json& rewards = require(j, "reward_factors", "");
  if (!rewards.is_array() || rewards.size() != g.num_reward_factors()) {
    throw SchemaError("reward_factors", "expected one table per reward scope");
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const std::string p = join_path("reward_factors", i);
    auto means = as_doubles(rewards[i], p);
    if (means.size() != g.reward_domain(i)) {
      throw SchemaError(p, "expected " + std::to_string(g.reward_domain(i)) + " rows");
    }
    mdp.reward_means.push_back(std::move(means));
  }

  const json& transitions = require(j, "transition_factors", "");
  if (!transitions.is_array() || transitions.size() != g.num_state_factors()) {
    throw SchemaError("transition_factors", "expected one table per state factor");
  }
  for (std::size_t f = 0; f < transitions.size(); ++f) {
    const std::string p = join_path("transition_factors", f);
    const json& rows = transitions[f];
    const Index domain = g.transition_domain(f);
    if (!rows.is_array() || rows.size() != domain) {
      throw SchemaError(p, "expected " + std::to_string(domain) + " rows");
    }
    ProbabilityTable table(domain, g.state_sizes[f]);
    for (Index z = 0; z < domain; ++z) {
      auto row = as_doubles(rows[z], join_path(p, z));
      if (row.size() != g.state_sizes[f]) {
        throw SchemaError(join_path(p, z), "expected " + std::to_string(g.state_sizes[f]) +
                                               " outcome probabilities");
      }
      std::copy(row.begin(), row.end(), table.row(z).begin());
    }
    mdp.transitions.push_back(std::move(table));
  }

  mdp.initial_distribution =
      as_doubles(require(j, "initial_distribution", ""), "initial_distribution");
  if (mdp.initial_distribution.size() != g.num_states()) {
    throw SchemaError("initial_distribution",
                      "expected " + std::to_string(g.num_states()) + " entries");
  }
  return mdp;
}

inline json stats_to_json(const FactorStats& stats) {
  return json{{"schema_version", kStatsSchemaVersion},
              {"structure", structure_to_json(stats.structure)},
              {"reward_counts", stats.reward_counts},
              {"reward_sums", stats.reward_sums},
              {"transition_counts", stats.transition_counts},
              {"outcome_counts", stats.outcome_counts}};
}

inline FactorStats stats_from_json(const json& j) {
  using namespace detail;
  const json& version = require(j, "schema_version", "");
  if (!version.is_number_integer() || version.get<int>() != kStatsSchemaVersion) {
    throw SchemaError("schema_version",
                      "unsupported version (expected " + std::to_string(kStatsSchemaVersion) + ")");
  }
  FactorStats stats(structure_from_json(require(j, "structure", ""), "structure"));
  auto nested = [&]<class T>(const char* key, std::vector<std::vector<T>>& target) {
    const json& arr = require(j, key, "");
    if (!arr.is_array() || arr.size() != target.size()) {
      throw SchemaError(key, "expected " + std::to_string(target.size()) + " tables");
    }
    for (std::size_t k = 0; k < arr.size(); ++k) {
      auto values = as_count_vector<T>(arr[k], join_path(key, k));
      if (values.size() != target[k].size()) {
        throw SchemaError(join_path(key, k),
                          "expected " + std::to_string(target[k].size()) + " entries");
      }
      target[k] = std::move(values);
    }
  };
  nested("reward_counts", stats.reward_counts);
  nested("reward_sums", stats.reward_sums);
  nested("transition_counts", stats.transition_counts);
  nested("outcome_counts", stats.outcome_counts);
  const auto& g = stats.structure;
  for (Index f = 0; f < g.num_state_factors(); ++f) {
    for (Index z = 0; z < g.transition_domain(f); ++z) {
      Count total = 0;
      for (Index y = 0; y < g.state_sizes[f]; ++y) {
        total += stats.outcome_counts[f][z * g.state_sizes[f] + y];
      }
      if (total != stats.transition_counts[f][z]) {
        throw SchemaError(join_path(join_path("outcome_counts", f), z),
                          "outcome counts do not sum to the row visit count");
      }
    }
  }
  return stats;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path, std::string("malformed JSON: ") + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline FactoredMdp read_mdp_file(const std::string& path) {
  return mdp_from_json(read_json_file(path));
}

inline void write_mdp_file(const std::string& path, const FactoredMdp& mdp) {
  write_text_file(path, mdp_to_json(mdp).dump(1) + "\n");
}

}  // namespace frl
