#pragma once

// Command-line front end. Every subcommand is a function writing to the
// given streams and returning the process exit code, so tests drive them
// without spawning processes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "frl/bounds.hpp"
#include "frl/config.hpp"
#include "frl/harness.hpp"
#include "frl/serialization.hpp"

namespace frl::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

enum class Format { csv, json };

inline std::string human(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace detail {

/// Rejects environments that cannot be flattened under `cap` (and file
/// environments that do not load) before any run starts.
inline void check_feasible(const EnvironmentSpec& environment, Index cap) {
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, SymmetricEnvSpec>) {
          frl::detail::check_cap(symmetric_structure(e.m, e.K, e.zeta, e.tau), cap);
        } else if constexpr (std::is_same_v<T, ProductionLineSpec>) {
          frl::detail::check_cap(production_line_structure(e.machines, e.K, e.tau), cap);
        } else {
          build_environment(e, 0, cap);
        }
      },
      environment);
}

}  // namespace detail

struct RunOptions {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  int jobs = 0;  // 0 keeps the config's value
  Format format = Format::csv;
  bool verbose = false;
};

/// `run`: executes the experiment and writes one set of artifacts per seed.
inline int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(opt.config);
    config.cap = cap_from_environment();
    if (!opt.seeds.empty()) config.seeds = opt.seeds;
    if (opt.jobs > 0) config.jobs = opt.jobs;
    if (!opt.out.empty()) config.output = opt.out;
    if (config.output.empty()) config.output = "runs";
    detail::check_feasible(config.environment, config.cap);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    const auto runs = run_experiment(config);
    write_run_artifacts(config.output, config, runs);
    if (opt.format == Format::json) {
      json summary = json::array();
      for (const auto& run : runs) {
        summary.push_back({{"seed", run.seed},
                           {"episodes", run.records.size()},
                           {"regret", run.regret()},
                           {"config_hash", run.config_hash}});
      }
      out << json{{"output", config.output}, {"runs", summary}}.dump(2) << "\n";
    } else {
      out << "seed,episodes,regret\n";
      for (const auto& run : runs) {
        char line[96];
        std::snprintf(line, sizeof line, "%llu,%zu,%.17g\n",
                      static_cast<unsigned long long>(run.seed), run.records.size(), run.regret());
        out << line;
      }
    }
    if (opt.verbose) {
      err << "wrote " << runs.size() << " run(s) to " << config.output << " (config hash "
          << config_hash(config) << ")\n";
    }
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}

struct BoundsOptions {
  std::optional<Index> m, K, zeta;
  std::optional<int> tau;
  std::string mdp;
  double T = 0.0;
  double delta = 0.1;
  std::optional<double> psi;
  std::optional<double> diameter;
  std::optional<double> k;
  Format format = Format::csv;
};

/// `bounds`: evaluates both regret bounds and, for symmetric arguments, both
/// clean symmetric forms. The PSRL bound is undefined for T <= 4; the message
/// says so and the exit code is 1.
inline int cmd_bounds(const BoundsOptions& opt, std::ostream& out, std::ostream& err) {
  GraphStructure g;
  double psi = 0.0;
  double D = 0.0;
  bool symmetric = false;
  try {
    if (!opt.mdp.empty()) {
      const FactoredMdp mdp = read_mdp_file(opt.mdp);
      auto report = validate(mdp);
      if (!report.ok()) throw SchemaError(opt.mdp, report.violations.front().message);
      g = mdp.structure;
      const Index cap = cap_from_environment();
      const TabularMdp tab = flatten(mdp, cap);
      psi = opt.psi.value_or(span(value_iteration(tab).values.at(0)));
      D = opt.diameter.value_or(diameter(tab));
    } else {
      if (!opt.m || !opt.K || !opt.zeta || !opt.tau) {
        throw SchemaError("bounds", "give --mdp or all of --m, --K, --zeta, --tau");
      }
      if (!opt.psi || !opt.diameter) {
        throw SchemaError("bounds", "--psi and --diameter are required with structure arguments");
      }
      g = symmetric_structure(*opt.m, *opt.K, *opt.zeta, *opt.tau);
      psi = *opt.psi;
      D = *opt.diameter;
      symmetric = true;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  BoundInputs in{g, opt.T, opt.delta, psi, D, opt.k};
  std::optional<double> theorem1, theorem2, corollary1, corollary2;
  std::vector<std::string> errors;
  auto attempt = [&](const char* name, auto&& f, std::optional<double>& slot) {
    try {
      slot = f();
    } catch (const std::exception& e) {
      errors.push_back(std::string(name) + ": domain error: " + e.what());
    }
  };
  attempt("psrl_regret_bound", [&] { return psrl_regret_bound(in); }, theorem1);
  attempt("ucrl_regret_bound", [&] { return ucrl_regret_bound(in); }, theorem2);
  if (symmetric) {
    const double J = std::pow(static_cast<double>(*opt.K), static_cast<double>(*opt.zeta));
    const double m = static_cast<double>(*opt.m);
    const double K = static_cast<double>(*opt.K);
    attempt("corollary_psrl", [&] { return corollary_psrl(m, *opt.tau, J, K, opt.T); }, corollary1);
    attempt("corollary_ucrl",
            [&] { return corollary_ucrl(m, *opt.tau, J, K, opt.T, opt.delta); }, corollary2);
  }

  auto to_json = [](const std::optional<double>& v) {
    if (!v) return json(nullptr);
    if (std::isinf(*v)) return json("inf");
    return json(*v);
  };
  if (opt.format == Format::json) {
    json inputs{{"T", opt.T}, {"delta", opt.delta}, {"psi", psi}, {"diameter", to_json(D)},
                {"k", in.resolved_k()}, {"structure", structure_to_json(g)}};
    json doc{{"inputs", inputs},
             {"bounds",
              {{"psrl_regret_bound", to_json(theorem1)},
               {"ucrl_regret_bound", to_json(theorem2)},
               {"corollary_psrl", to_json(corollary1)},
               {"corollary_ucrl", to_json(corollary2)}}},
             {"errors", errors}};
    out << doc.dump(2) << "\n";
  } else {
    out << "inputs: T=" << human(opt.T) << " delta=" << human(opt.delta) << " psi=" << human(psi)
        << " D=" << human(D) << " k=" << human(in.resolved_k()) << " m=" << g.num_state_factors()
        << " l=" << g.num_reward_factors() << " tau=" << g.horizon << "\n";
    auto row = [&](const char* name, const std::optional<double>& v, bool applicable) {
      out << name << " " << (!applicable ? "n/a" : v ? human(*v) : "error") << "\n";
    };
    row("psrl_regret_bound", theorem1, true);
    row("ucrl_regret_bound", theorem2, true);
    row("corollary_psrl", corollary1, symmetric);
    row("corollary_ucrl", corollary2, symmetric);
  }
  for (const auto& e : errors) err << e << "\n";
  return errors.empty() ? kOk : kConfigError;
}

namespace detail {

struct CsvRow {
  std::uint64_t k = 0;
  double delta_k = 0.0;
  double cum_regret = 0.0;
  double width_reward = 0.0;
  double width_transition = 0.0;
};

inline std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error(path + ": unexpected header");
  }
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 8) {
      throw std::runtime_error(path + ": malformed row " + std::to_string(rows.size() + 1));
    }
    CsvRow r;
    r.k = std::stoull(cells[0]);
    r.delta_k = std::strtod(cells[1].c_str(), nullptr);
    r.cum_regret = std::strtod(cells[2].c_str(), nullptr);
    r.width_reward = std::strtod(cells[6].c_str(), nullptr);
    r.width_transition = std::strtod(cells[7].c_str(), nullptr);
    rows.push_back(r);
  }
  return rows;
}

inline bool close(double a, double b, double rel = 1e-12) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

struct AuditOptions {
  std::string dir;
  Format format = Format::csv;
  bool verbose = false;
};

/// `audit`: replays every run in a directory. Exit 0 iff every width-sum
/// inequality holds and the recorded widths and regret sums match the replay.
inline int cmd_audit(const AuditOptions& opt, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  std::vector<fs::path> manifests;
  if (fs::is_directory(opt.dir)) {
    for (const auto& entry : fs::directory_iterator(opt.dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("run_", 0) == 0 && name.size() > 14 &&
          name.substr(name.size() - 14) == ".manifest.json") {
        manifests.push_back(entry.path());
      }
    }
  }
  if (manifests.empty()) {
    err << "no runs found in " << opt.dir << "\n";
    return kConfigError;
  }
  std::sort(manifests.begin(), manifests.end());

  bool all_ok = true;
  std::size_t covered = 0;
  json report = json::array();
  for (const auto& manifest_path : manifests) {
    const std::string stem =
        manifest_path.string().substr(0, manifest_path.string().size() - 14);
    json entry;
    try {
      const json manifest = read_json_file(manifest_path.string());
      const json log_doc = read_json_file(stem + ".log.json");
      const FactoredMdp truth = read_mdp_file(stem + ".mdp.json");
      const auto rows = detail::read_csv(stem + ".csv");
      const auto logs = logs_from_json(log_doc.at("episodes"));
      const double delta = log_doc.at("delta").get<double>();
      const auto& g = truth.structure;
      const bool widths_recorded = manifest.at("config").at("audit").at("width").get<bool>();
      entry["seed"] = manifest.at("seed");
      if (rows.size() != logs.size()) {
        throw std::runtime_error("CSV has " + std::to_string(rows.size()) + " episodes, log has " +
                                 std::to_string(logs.size()));
      }

      std::vector<std::string> failures;
      json factors = json::array();
      for (const auto& check : audit_width_sums(g, logs, delta)) {
        factors.push_back({{"kind", to_string(check.kind)},
                           {"factor", check.factor},
                           {"empirical", check.audit.empirical},
                           {"bound", check.audit.bound},
                           {"holds", check.audit.holds()}});
        if (!check.audit.holds()) {
          failures.push_back(std::string(to_string(check.kind)) + " factor " +
                             std::to_string(check.factor) + ": width sum " +
                             human(check.audit.empirical) + " exceeds " +
                             human(check.audit.bound));
        }
      }

      // Replay: recorded widths and regret prefix sums must match.
      FactorStats stats(g);
      double cumulative = 0.0;
      for (std::size_t k = 0; k < logs.size(); ++k) {
        const auto& row = rows[k];
        if (row.k != k + 1) failures.push_back("episode numbering breaks at row " + std::to_string(k + 1));
        cumulative += row.delta_k;
        if (cumulative != row.cum_regret) {
          failures.push_back("episode " + std::to_string(k + 1) +
                             ": cumulative regret is not the prefix sum of delta_k");
        }
        if (widths_recorded) {
          const auto family = build_family(stats, k + 1, delta);
          const auto [wr, wt] = episode_width_sums(family, logs[k]);
          if (!detail::close(wr, row.width_reward) || !detail::close(wt, row.width_transition)) {
            failures.push_back("episode " + std::to_string(k + 1) +
                               ": recorded width sum does not match the replayed log");
          }
        }
        for (const auto& t : logs[k]) stats.update(t.x, t.rewards, t.next_state);
      }
      const bool run_covered = covered_throughout(truth, logs, delta);
      covered += run_covered ? 1 : 0;
      entry["factors"] = factors;
      entry["covered"] = run_covered;
      entry["failures"] = failures;
      entry["ok"] = failures.empty();
      if (!failures.empty()) all_ok = false;
    } catch (const std::exception& e) {
      entry["ok"] = false;
      entry["failures"] = {std::string("corrupt or missing run files: ") + e.what()};
      all_ok = false;
    }
    entry["run"] = fs::path(stem).filename().string();
    report.push_back(entry);
  }

  const CoverageReport cov = coverage_report(covered, manifests.size());
  if (opt.format == Format::json) {
    out << json{{"runs", report},
                {"coverage",
                 {{"runs", cov.runs},
                  {"covered", cov.covered},
                  {"fraction", cov.fraction},
                  {"lower_limit_95", cov.lower_limit}}},
                {"ok", all_ok}}
               .dump(2)
        << "\n";
  } else {
    for (const auto& entry : report) {
      out << entry["run"].get<std::string>() << ": "
          << (entry["ok"].get<bool>() ? "PASS" : "FAIL") << "\n";
      for (const auto& f : entry["failures"]) out << "  " << f.get<std::string>() << "\n";
      if (opt.verbose && entry.contains("factors")) {
        for (const auto& f : entry["factors"]) {
          out << "  " << f["kind"].get<std::string>() << " " << f["factor"].get<Index>() << ": "
              << human(f["empirical"].get<double>()) << " <= " << human(f["bound"].get<double>())
              << "\n";
        }
      }
    }
    out << "coverage: " << cov.covered << "/" << cov.runs << " = " << human(cov.fraction)
        << " (95% lower limit " << human(cov.lower_limit) << ")\n";
  }
  return all_ok ? kOk : kConfigError;
}

struct ValidateOptions {
  std::string path;
  Format format = Format::csv;
};

/// `validate`: checks an FMDP JSON file or an experiment configuration.
inline int cmd_validate(const ValidateOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const json doc = parse_config_document(opt.path);
    if (doc.is_object() && doc.contains("structure")) {
      const FactoredMdp mdp = mdp_from_json(doc);
      const auto report = validate(mdp);
      if (opt.format == Format::json) {
        json v = json::array();
        for (const auto& x : report.violations) v.push_back(x.message);
        out << json{{"kind", "fmdp"}, {"ok", report.ok()}, {"violations", v}}.dump(2) << "\n";
      } else {
        out << (report.ok() ? "fmdp ok" : "fmdp invalid") << "\n";
        for (const auto& x : report.violations) out << "  " << x.message << "\n";
      }
      return report.ok() ? kOk : kConfigError;
    }
    const ExperimentConfig config =
        config_from_json(doc, std::filesystem::path(opt.path).parent_path().string());
    const Index cap = cap_from_environment();
    detail::check_feasible(config.environment, cap);
    if (opt.format == Format::json) {
      out << json{{"kind", "config"}, {"ok", true}, {"config_hash", config_hash(config)},
                  {"config", canonical_config(config)}, {"seeds", config.seeds}}
                 .dump(2)
          << "\n";
    } else {
      out << "config ok (hash " << config_hash(config) << ", " << config.seeds.size()
          << " seed(s), " << config.episodes << " episode(s))\n";
    }
    return kOk;
  } catch (const std::exception& e) {
    err << "invalid: " << e.what() << "\n";
    return kConfigError;
  }
}

/// Parses `args` (without the program name) and dispatches to a subcommand.
inline int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Factored-MDP regret benchmarks: PSRL and UCRL-Factored", "frl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kLibraryVersion);
  const std::map<std::string, Format> formats{{"csv", Format::csv}, {"json", Format::json}};

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "Run an experiment and write per-seed artifacts");
  run->add_option("--config,config", run_opt.config, "TOML or JSON experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", run_opt.out, "Output directory (overrides the config)");
  run->add_option("--seed", run_opt.seeds, "Seed override (repeatable)");
  run->add_option("--jobs", run_opt.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  run->add_option("--format", run_opt.format, "Summary format")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  run->add_flag("--verbose", run_opt.verbose);

  BoundsOptions bounds_opt;
  auto* bounds = app.add_subcommand("bounds", "Evaluate the regret bounds");
  bounds->add_option("--m", bounds_opt.m, "State factors of the symmetric structure");
  bounds->add_option("--K", bounds_opt.K, "Factor size");
  bounds->add_option("--zeta", bounds_opt.zeta, "Scope size");
  bounds->add_option("--tau", bounds_opt.tau, "Episode length");
  bounds->add_option("--mdp", bounds_opt.mdp, "FMDP JSON file instead of structure arguments");
  bounds->add_option("--T", bounds_opt.T, "Elapsed steps")->required();
  bounds->add_option("--delta", bounds_opt.delta, "Confidence parameter");
  bounds->add_option("--psi", bounds_opt.psi, "Span of the optimal values");
  bounds->add_option("--diameter", bounds_opt.diameter, "Diameter");
  bounds->add_option("--k", bounds_opt.k, "Value of k inside the logarithms (default ceil(T/tau))");
  bounds->add_option("--format", bounds_opt.format, "Output format")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));

  AuditOptions audit_opt;
  auto* audit = app.add_subcommand("audit", "Replay the audits of a run directory");
  audit->add_option("--out,dir", audit_opt.dir, "Run directory")->required();
  audit->add_option("--format", audit_opt.format, "Output format")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  audit->add_flag("--verbose", audit_opt.verbose);

  ValidateOptions validate_opt;
  auto* validate_cmd = app.add_subcommand("validate", "Validate an FMDP file or a config");
  validate_cmd->add_option("--config,path", validate_opt.path, "FMDP JSON or experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  validate_cmd->add_option("--format", validate_opt.format, "Output format")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  if (*run) return cmd_run(run_opt, out, err);
  if (*bounds) return cmd_bounds(bounds_opt, out, err);
  if (*audit) return cmd_audit(audit_opt, out, err);
  return cmd_validate(validate_opt, out, err);
}

}  // namespace frl::cli
