#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlnet/analysis.hpp"
#include "mlnet/error.hpp"
#include "mlnet/graph.hpp"
#include "mlnet/io.hpp"
#include "mlnet/process.hpp"
#include "mlnet/signal_model.hpp"

namespace mlnet {

/// Everything needed to reproduce one experiment.
struct ExperimentConfig {
  std::string family;      ///< path|star|cycle|complete|random; empty with edges_path
  std::size_t n = 0;
  double p = 0.5;          ///< edge probability for the random family
  std::uint64_t seed = 0;  ///< random-family seed
  std::string edges_path;
  Dynamics dynamics = Dynamics::ml;
  std::string sigma0 = "identity";  ///< identity | diag:<csv> | file:<path>
  double mu = 0.0;
  StopCriteria stop;
  double rtol = kDefaultRtol;
  bool centered = false;
  FusionMode fusion = FusionMode::anchored;
  std::string out_dir = "mlnet-out";
  std::vector<std::uint64_t> sample_seeds;

  RunOptions run_options() const {
    RunOptions o;
    o.stop = stop;
    o.fusion.rtol = rtol;
    o.fusion.centered = centered;
    o.fusion.mode = fusion;
    return o;
  }
};

inline void validate(const ExperimentConfig& cfg) {
  const bool has_family = !cfg.family.empty();
  const bool has_edges = !cfg.edges_path.empty();
  if (has_family == has_edges) throw ConfigError("exactly one of --family or --edges is required");
  if (has_family) {
    static const std::set<std::string> families{"path", "star", "cycle", "complete", "random"};
    if (!families.count(cfg.family)) throw ConfigError("--family: unknown family '" + cfg.family + "'");
    const std::size_t min_n = cfg.family == "star" ? 2 : cfg.family == "cycle" ? 3 : 1;
    if (cfg.n < min_n)
      throw ConfigError("--n: family " + cfg.family + " needs n >= " + std::to_string(min_n));
    if (cfg.family == "random" && !(cfg.p > 0.0 && cfg.p <= 1.0)) throw ConfigError("--p: must lie in (0, 1]");
  }
  if (!(cfg.stop.eps_consensus > 0.0)) throw ConfigError("--eps-consensus: must be positive");
  if (!(cfg.stop.eps_variance_drop > 0.0)) throw ConfigError("--eps-variance-drop: must be positive");
  if (cfg.stop.max_iters < 1) throw ConfigError("--max-iters: must be at least 1");
  if (!(cfg.rtol > 0.0)) throw ConfigError("--rtol: must be positive");
}

inline Graph build_graph(const ExperimentConfig& cfg) {
  validate(cfg);
  if (!cfg.edges_path.empty()) return read_edge_list(cfg.edges_path);
  if (cfg.family == "path") return path_graph(cfg.n);
  if (cfg.family == "star") return star_graph(cfg.n);
  if (cfg.family == "cycle") return cycle_graph(cfg.n);
  if (cfg.family == "complete") return complete_graph(cfg.n);
  return random_connected_graph(cfg.n, cfg.p, cfg.seed);
}

namespace detail {

inline std::vector<double> parse_real_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(field + ": cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

inline Matrix read_dense_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--sigma0: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError(path + " line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw ConfigError(path + ": matrix is not square");
    for (std::size_t j = 0; j < rows.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

}  // namespace detail

inline SignalModel build_model(const ExperimentConfig& cfg, std::size_t n) {
  const std::string& spec = cfg.sigma0;
  try {
    if (spec == "identity") return SignalModel(Covariance::identity(n), cfg.mu, cfg.rtol);
    if (spec.rfind("diag:", 0) == 0) {
      const auto values = detail::parse_real_list(spec.substr(5), "--sigma0");
      if (values.size() != n)
        throw ConfigError("--sigma0: expected " + std::to_string(n) + " diagonal entries, got " +
                          std::to_string(values.size()));
      return SignalModel(Covariance::diagonal(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(n))),
                         cfg.mu, cfg.rtol);
    }
    if (spec.rfind("file:", 0) == 0) {
      const Matrix m = detail::read_dense_matrix(spec.substr(5));
      if (static_cast<std::size_t>(m.rows()) != n)
        throw ConfigError("--sigma0: matrix order " + std::to_string(m.rows()) + " does not match n=" +
                          std::to_string(n));
      return SignalModel(Covariance::dense(m, cfg.rtol), cfg.mu, cfg.rtol);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("--sigma0: ") + e.what());
  }
  throw ConfigError("--sigma0: expected identity, diag:<csv> or file:<path>");
}

inline nlohmann::json graph_json(const Graph& g, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["family"] = cfg.edges_path.empty() ? cfg.family : std::string("edges");
  j["n"] = g.size();
  j["edges"] = g.edges().size();
  if (cfg.family == "random") {
    j["p"] = cfg.p;
    j["seed"] = cfg.seed;
  }
  return j;
}

inline nlohmann::json settings_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["sigma0"] = cfg.sigma0;
  j["eps_consensus"] = cfg.stop.eps_consensus;
  j["eps_variance_drop"] = cfg.stop.eps_variance_drop;
  j["max_iters"] = cfg.stop.max_iters;
  j["rtol"] = cfg.rtol;
  j["fusion"] = to_string(cfg.fusion);
  j["centered"] = cfg.centered;
  return j;
}

inline std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Exit codes shared by the commands.
enum ExitCode : int { kExitConverged = 0, kExitError = 1, kExitUndetermined = 2 };

/// Runs one dynamics and writes trace.csv and summary.json (plus
/// realizations.csv when sample seeds are given).
inline int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
  const Graph g = build_graph(cfg);
  const SignalModel model = build_model(cfg, g.size());
  const Trace trace = run(cfg.dynamics, g, model, cfg.run_options());

  nlohmann::json summary = trace_summary(trace);
  summary["graph"] = graph_json(g, cfg);
  summary["settings"] = settings_json(cfg);
  summary["global_mle_variance"] = model.global_variance();

  std::ostringstream csv;
  write_trace_csv(csv, trace);
  std::ostringstream samples;
  if (!cfg.sample_seeds.empty()) {
    samples << "seed";
    for (std::size_t v = 0; v < g.size(); ++v) samples << ",X_" << v;
    samples << '\n';
    for (auto seed : cfg.sample_seeds) {
      samples << seed;
      for (double x : sample_realization(trace.final_state, model, seed)) samples << ',' << format_real(x);
      samples << '\n';
    }
  }

  const auto dir = prepare_out_dir(cfg);
  write_text_atomic(dir / "trace.csv", csv.str());
  write_text_atomic(dir / "summary.json", dump_json(summary));
  if (!cfg.sample_seeds.empty()) write_text_atomic(dir / "realizations.csv", samples.str());

  log << to_string(cfg.dynamics) << ": " << (trace.converged ? "converged" : "undetermined") << " after "
      << trace.iterations << " iterations, limit variance " << format_real(trace.limit_variance) << '\n';
  return trace.converged ? kExitConverged : kExitUndetermined;
}

/// Writes report.json: price of anarchy, convergence rate, the averaging
/// spectral rate, the memory-variant iteration count and, for paths of even
/// length, the Gaussian profile fit of the limit weights.
inline int cmd_analyze(const ExperimentConfig& cfg, std::ostream& log) {
  const Graph g = build_graph(cfg);
  const SignalModel model = build_model(cfg, g.size());
  const RunOptions opts = cfg.run_options();
  const Trace ml = run(Dynamics::ml, g, model, opts);
  const Trace memory = run(Dynamics::ml_memory, g, model, opts);
  const MinVariance global = global_mle(g, model);

  nlohmann::json report;
  report["graph"] = graph_json(g, cfg);
  report["settings"] = settings_json(cfg);
  report["n"] = g.size();
  report["converged"] = ml.converged;
  report["status"] = ml.converged ? "converged" : "undetermined";
  report["iterations"] = ml.iterations;
  report["limit_weights"] = to_json(ml.limit_weights);
  report["limit_variance"] = ml.limit_variance;
  report["global_mle_variance"] = global.variance;
  report["price_of_anarchy"] = ml.converged ? nlohmann::json(ml.limit_variance / global.variance) : nlohmann::json(nullptr);
  report["rate_estimate"] = optional_json(ml.rate_estimate);
  report["variance_rate_estimate"] =
      ml.rate_estimate ? nlohmann::json(*ml.rate_estimate * *ml.rate_estimate) : nlohmann::json(nullptr);
  report["averaging_second_eigenvalue"] = second_eigenvalue_magnitude(averaging_matrix(g));

  nlohmann::json mem;
  mem["converged"] = memory.converged;
  mem["iterations"] = memory.iterations;
  mem["vertices"] = g.size();
  mem["max_deviation_from_global"] = (memory.limit_weights - global.weights).cwiseAbs().maxCoeff();
  report["memory_probe"] = mem;

  const bool even_path = g.family() == GraphFamily::path && g.size() % 2 == 0;
  if (even_path && ml.converged) {
    const ProfileFit fit = gaussian_profile_fit(ml.limit_weights);
    report["profile_fit"] = {{"amplitude", fit.amplitude}, {"nu", fit.width}, {"residual", fit.residual}};
  } else {
    report["profile_fit"] = nullptr;
  }

  const auto dir = prepare_out_dir(cfg);
  write_text_atomic(dir / "report.json", dump_json(report));
  log << "analyze: n=" << g.size() << " price of anarchy "
      << (ml.converged ? format_real(ml.limit_variance / global.variance) : std::string("undetermined")) << '\n';
  return ml.converged ? kExitConverged : kExitUndetermined;
}

/// Runs ML, averaging and the global estimator on one graph; writes
/// compare.csv and prints an aligned table.
inline int cmd_compare(const ExperimentConfig& cfg, std::ostream& out) {
  const Graph g = build_graph(cfg);
  const SignalModel model = build_model(cfg, g.size());
  const RunOptions opts = cfg.run_options();
  const Trace ml = run(Dynamics::ml, g, model, opts);
  const Trace avg = run(Dynamics::averaging, g, model, opts);
  const MinVariance global = global_mle(g, model);

  struct Line {
    std::string method;
    double variance;
    std::optional<std::size_t> iterations;
    std::optional<double> rate;
    bool converged;
  };
  const std::vector<Line> lines{
      {"ml", ml.limit_variance, ml.iterations, ml.rate_estimate, ml.converged},
      {"averaging", avg.limit_variance, avg.iterations, avg.rate_estimate, avg.converged},
      {"global_mle", global.variance, std::nullopt, std::nullopt, true},
  };

  std::ostringstream csv;
  csv << "method,limit_variance,iterations,rate_estimate,converged\n";
  for (const auto& l : lines) {
    csv << l.method << ',' << format_real(l.variance) << ',' << (l.iterations ? std::to_string(*l.iterations) : "")
        << ',' << (l.rate ? format_real(*l.rate) : "") << ',' << (l.converged ? "true" : "false") << '\n';
  }
  const auto dir = prepare_out_dir(cfg);
  write_text_atomic(dir / "compare.csv", csv.str());

  out << std::left << std::setw(12) << "method" << std::setw(24) << "limit_variance" << std::setw(12)
      << "iterations" << "rate\n";
  for (const auto& l : lines) {
    out << std::left << std::setw(12) << l.method << std::setw(24) << format_real(l.variance) << std::setw(12)
        << (l.iterations ? std::to_string(*l.iterations) : "-") << (l.rate ? format_real(*l.rate) : "-") << '\n';
  }
  return ml.converged && avg.converged ? kExitConverged : kExitUndetermined;
}

// ---------------------------------------------------------------------------
// Argument handling.

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{"family", "n",   "p",          "seed",     "edges",
                                          "dynamics", "sigma0", "mu",   "eps",      "eps-consensus",
                                          "eps-variance-drop", "max-iters", "rtol", "centered",
                                          "fusion", "out", "sample-seeds"};
  return keys;
}

/// Turns key=value lines into flags. Blank lines and '#' comments are skipped.
inline std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path + " line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    for (auto& ch : key)
      if (ch == '_') ch = '-';
    const std::string value = trim(line.substr(eq + 1));
    if (!known_keys().count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (key == "centered") {
      if (value == "true" || value == "1") args.push_back("--centered");
      else if (value != "false" && value != "0") throw ConfigError(where + ": centered must be true or false");
      continue;
    }
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

inline void add_experiment_options(CLI::App& cmd, ExperimentConfig& cfg, std::optional<double>& eps) {
  cmd.add_option("--family", cfg.family, "graph family: path|star|cycle|complete|random");
  cmd.add_option("--n", cfg.n, "vertex count");
  cmd.add_option("--p", cfg.p, "edge probability (random family)");
  cmd.add_option("--seed", cfg.seed, "seed (random family)");
  cmd.add_option("--edges", cfg.edges_path, "edge-list file");
  cmd.add_option("--dynamics", cfg.dynamics, "ml|ml_memory|averaging")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Dynamics>{{"ml", Dynamics::ml},
                                          {"ml_memory", Dynamics::ml_memory},
                                          {"averaging", Dynamics::averaging}},
          CLI::ignore_case));
  cmd.add_option("--sigma0", cfg.sigma0, "identity | diag:<csv> | file:<path>");
  cmd.add_option("--mu", cfg.mu, "signal mean used for realizations");
  cmd.add_option("--eps", eps, "sets both convergence epsilons");
  cmd.add_option("--eps-consensus", cfg.stop.eps_consensus, "consensus-gap threshold");
  cmd.add_option("--eps-variance-drop", cfg.stop.eps_variance_drop, "per-step variance change threshold");
  cmd.add_option("--max-iters", cfg.stop.max_iters, "iteration cap");
  cmd.add_option("--rtol", cfg.rtol, "relative eigenvalue cutoff for pseudo-inverses");
  cmd.add_flag("--centered", cfg.centered, "subtract Z(inf) before forming covariances");
  cmd.add_option("--fusion", cfg.fusion, "anchored|direct")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, FusionMode>{{"anchored", FusionMode::anchored}, {"direct", FusionMode::direct}},
          CLI::ignore_case));
  cmd.add_option("--out", cfg.out_dir, "output directory");
  cmd.add_option("--sample-seeds", cfg.sample_seeds, "seeds for realization sampling")->delimiter(',');
}

}  // namespace detail

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  // A config file's settings go first so that explicit flags override them.
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      std::vector<std::string> from_file;
      try {
        from_file = detail::config_file_args(args[i + 1]);
      } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
      }
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      const std::size_t insert_at = args.empty() ? 0 : 1;  // after the subcommand name
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), from_file.begin(), from_file.end());
      break;
    }
  }

  CLI::App app{"Iterative maximum-likelihood estimation on graphs"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  ExperimentConfig cfg;
  std::optional<double> eps;
  CLI::App* run_cmd = app.add_subcommand("run", "run one dynamics and write trace.csv + summary.json");
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "write report.json with efficiency and rate analysis");
  CLI::App* compare_cmd = app.add_subcommand("compare", "compare ML, averaging and the global estimator");
  for (CLI::App* cmd : {run_cmd, analyze_cmd, compare_cmd}) detail::add_experiment_options(*cmd, cfg, eps);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitConverged;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  if (eps) cfg.stop.eps_consensus = cfg.stop.eps_variance_drop = *eps;

  try {
    validate(cfg);
    if (run_cmd->parsed()) return cmd_run(cfg, out);
    if (analyze_cmd->parsed()) return cmd_analyze(cfg, out);
    return cmd_compare(cfg, out);
  } catch (const Undetermined& e) {
    err << "undetermined: " << e.what() << '\n';
    return kExitUndetermined;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace mlnet
