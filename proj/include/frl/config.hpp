#pragma once

// Experiment configuration files. TOML and JSON share one schema; the format
// is picked from the file extension and TOML documents are converted to JSON
// before validation, so every error names the same field path.

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include <json.hpp>
#include <toml.hpp>

#include "frl/harness.hpp"
#include "frl/serialization.hpp"

namespace frl {

namespace detail {

inline json toml_to_json(const toml::node& node) {
  if (auto* table = node.as_table()) {
    json out = json::object();
    for (auto&& [key, value] : *table) out[std::string(key.str())] = toml_to_json(value);
    return out;
  }
  if (auto* array = node.as_array()) {
    json out = json::array();
    for (auto&& value : *array) out.push_back(toml_to_json(value));
    return out;
  }
  if (auto* v = node.as_integer()) return v->get();
  if (auto* v = node.as_floating_point()) return v->get();
  if (auto* v = node.as_boolean()) return v->get();
  if (auto* v = node.as_string()) return v->get();
  throw SchemaError("", "unsupported TOML value (dates and times are not accepted)");
}

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "<root>" : path, "expected a table");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) throw SchemaError(join_path(path, it.key()), "unknown field");
  }
}

inline bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected true or false");
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

template <class F>
auto optional_field(const json& j, const std::string& path, const char* key, F&& parse)
    -> std::optional<decltype(parse(j, path))> {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  return parse(*it, join_path(path, key));
}

inline Index positive_index(const json& j, const std::string& path) {
  const Index v = as_index(j, path);
  if (v < 1) throw SchemaError(path, "must be >= 1");
  return v;
}

inline EnvironmentSpec parse_environment(const json& j, const std::string& base_dir) {
  const std::string path = "environment";
  const std::string kind = as_string(require(j, "kind", path), join_path(path, "kind"));
  if (kind == "symmetric") {
    reject_unknown(j, path, {"kind", "m", "K", "zeta", "tau", "draw_from_prior"});
    SymmetricEnvSpec e;
    e.m = positive_index(require(j, "m", path), join_path(path, "m"));
    e.K = positive_index(require(j, "K", path), join_path(path, "K"));
    e.zeta = positive_index(require(j, "zeta", path), join_path(path, "zeta"));
    e.tau = static_cast<int>(positive_index(require(j, "tau", path), join_path(path, "tau")));
    e.draw_from_prior = optional_field(j, path, "draw_from_prior", as_bool).value_or(false);
    if (e.zeta > e.m + 1) {
      throw SchemaError(join_path(path, "zeta"), "must not exceed the m + 1 factors of X");
    }
    return e;
  }
  if (kind == "production-line") {
    reject_unknown(j, path, {"kind", "machines", "K", "tau"});
    ProductionLineSpec e;
    e.machines = positive_index(require(j, "machines", path), join_path(path, "machines"));
    e.K = positive_index(require(j, "K", path), join_path(path, "K"));
    e.tau = static_cast<int>(positive_index(require(j, "tau", path), join_path(path, "tau")));
    return e;
  }
  if (kind == "file") {
    reject_unknown(j, path, {"kind", "path"});
    std::filesystem::path file = as_string(require(j, "path", path), join_path(path, "path"));
    if (file.is_relative() && !base_dir.empty()) file = std::filesystem::path(base_dir) / file;
    return FileEnvSpec{file.string()};
  }
  throw SchemaError(join_path(path, "kind"),
                    "unknown environment kind '" + kind +
                        "' (expected symmetric, production-line or file)");
}

inline AgentConfig parse_agent(const json& j) {
  const std::string path = "agent";
  reject_unknown(j, path, {"algorithm", "delta", "alpha0", "mu0", "v0", "sweeps", "optimism"});
  AgentConfig a;
  const std::string tag = as_string(require(j, "algorithm", path), join_path(path, "algorithm"));
  auto algorithm = parse_algorithm(tag);
  if (!algorithm) {
    throw SchemaError(join_path(path, "algorithm"),
                      "unknown agent tag '" + tag +
                          "' (expected psrl, ucrl-factored, psrl-flat, ucrl-flat, oracle or random)");
  }
  a.algorithm = *algorithm;
  if (auto d = optional_field(j, path, "delta", as_double)) {
    if (!(*d > 0.0 && *d < 1.0)) throw SchemaError(join_path(path, "delta"), "must lie in (0, 1)");
    a.delta = *d;
  }
  if (auto v = optional_field(j, path, "alpha0", as_double)) {
    if (!(*v > 0.0)) throw SchemaError(join_path(path, "alpha0"), "must be positive");
    a.prior.alpha0 = *v;
  }
  a.prior.mu0 = optional_field(j, path, "mu0", as_double);
  if (auto v = optional_field(j, path, "v0", as_double)) {
    if (!(*v > 0.0)) throw SchemaError(join_path(path, "v0"), "must be positive");
    a.prior.v0 = *v;
  }
  if (auto s = optional_field(j, path, "sweeps", positive_index)) a.sweeps = static_cast<int>(*s);
  if (auto mode = optional_field(j, path, "optimism", as_string)) {
    if (*mode == "coordinate-ascent") {
      a.optimism = OptimismMode::coordinate_ascent;
    } else if (*mode == "joint-relaxation") {
      a.optimism = OptimismMode::joint_relaxation;
    } else {
      throw SchemaError(join_path(path, "optimism"),
                        "expected coordinate-ascent or joint-relaxation");
    }
  }
  return a;
}

}  // namespace detail

/// Parses a configuration document. Relative environment file paths are
/// resolved against `base_dir`.
inline ExperimentConfig config_from_json(const json& j, const std::string& base_dir = "") {
  using namespace detail;
  reject_unknown(j, "",
                 {"episodes", "seeds", "seed_count", "seed_base", "output", "jobs", "environment",
                  "agent", "audit"});
  ExperimentConfig c;
  c.environment = parse_environment(require(j, "environment", ""), base_dir);
  c.agent = parse_agent(require(j, "agent", ""));
  c.episodes = positive_index(require(j, "episodes", ""), "episodes");

  if (j.contains("seeds")) {
    if (j.contains("seed_count") || j.contains("seed_base")) {
      throw SchemaError("seeds", "give either seeds or seed_count/seed_base, not both");
    }
    c.seeds.clear();
    for (Index s : as_indices(j["seeds"], "seeds")) c.seeds.push_back(s);
    if (c.seeds.empty()) throw SchemaError("seeds", "must not be empty");
  } else if (j.contains("seed_count")) {
    const Index count = positive_index(j["seed_count"], "seed_count");
    const Index base = optional_field(j, "", "seed_base", as_index).value_or(0);
    c.seeds.clear();
    for (Index s = 0; s < count; ++s) c.seeds.push_back(base + s);
  }
  if (auto out = optional_field(j, "", "output", as_string)) c.output = *out;
  if (auto jobs = optional_field(j, "", "jobs", positive_index)) c.jobs = static_cast<int>(*jobs);
  if (auto it = j.find("audit"); it != j.end()) {
    reject_unknown(*it, "audit", {"width", "coverage"});
    c.audit.width = optional_field(*it, "audit", "width", as_bool).value_or(true);
    c.audit.coverage = optional_field(*it, "audit", "coverage", as_bool).value_or(false);
  }
  return c;
}

inline json parse_config_document(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (!std::filesystem::exists(path)) throw std::runtime_error("config file not found: " + path);
  if (ext == ".toml") {
    try {
      return detail::toml_to_json(toml::parse_file(path));
    } catch (const toml::parse_error& e) {
      const auto& at = e.source().begin;
      throw SchemaError(path + ":" + std::to_string(at.line) + ":" + std::to_string(at.column),
                        "malformed TOML: " + std::string(e.description()));
    }
  }
  if (ext == ".json") return read_json_file(path);
  throw SchemaError(path, "unrecognized config extension '" + ext + "' (expected .toml or .json)");
}

/// Reads a TOML or JSON experiment configuration.
inline ExperimentConfig load_config(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path().string();
  return config_from_json(parse_config_document(path), base);
}

/// Desk-scale cap from FRL_CAP, falling back to the default.
inline Index cap_from_environment() {
  const char* raw = std::getenv("FRL_CAP");
  if (raw == nullptr || *raw == '\0') return kDefaultDeskCap;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (*end != '\0' || v == 0) {
    throw SchemaError("FRL_CAP", std::string("expected a positive integer, got '") + raw + "'");
  }
  return static_cast<Index>(v);
}

}  // namespace frl
