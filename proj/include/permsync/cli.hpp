#pragma once

// Command-line frontend: gen, solve, sweep, plot.
//
// Exit codes: 0 success, 2 argument/format/IO error, 3 numerical failure,
// 4 sweep with at least one grid cell that has no successful trial.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "permsync/error.hpp"
#include "permsync/experiment.hpp"
#include "permsync/format.hpp"
#include "permsync/io.hpp"
#include "permsync/model.hpp"
#include "permsync/plot.hpp"
#include "permsync/spectrum.hpp"
#include "permsync/sync.hpp"

namespace permsync::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitPartial = 4;

/// Flat "key = value" configuration; '#' starts a comment.
inline std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace detail {

struct SweepArgs {
  std::size_t n = 256;
  std::size_t d = 2;
  double p = 0.5;
  std::vector<double> sigmas{1.0};
  std::size_t trials = 20;
  std::vector<std::string> methods{"vanilla", "anchored"};
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;
  std::string truth_mode = "random";
  std::string out = "sweep-out";
  bool collect_diagnostics = false;
  bool timings = false;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw FormatError("bad boolean '" + s + "'");
}

/// Setters for keys that may come from a config file or --paper-default.
inline std::map<std::string, std::function<void(SweepArgs&, const std::string&)>> sweep_setters() {
  auto to_size = [](const std::string& v) {
    const long long x = parse_int(v);
    if (x < 0) throw FormatError("expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(x);
  };
  return {
      {"n", [=](SweepArgs& a, const std::string& v) { a.n = to_size(v); }},
      {"d", [=](SweepArgs& a, const std::string& v) { a.d = to_size(v); }},
      {"p", [](SweepArgs& a, const std::string& v) { a.p = parse_double(v); }},
      {"sigmas",
       [](SweepArgs& a, const std::string& v) {
         a.sigmas.clear();
         for (const auto& s : split_list(v)) a.sigmas.push_back(parse_double(s));
       }},
      {"trials", [=](SweepArgs& a, const std::string& v) { a.trials = to_size(v); }},
      {"methods", [](SweepArgs& a, const std::string& v) { a.methods = split_list(v); }},
      {"parallelism", [=](SweepArgs& a, const std::string& v) { a.parallelism = to_size(v); }},
      {"seed", [](SweepArgs& a, const std::string& v) { a.seed = static_cast<std::uint64_t>(parse_int(v)); }},
      {"truth-mode", [](SweepArgs& a, const std::string& v) { a.truth_mode = v; }},
      {"out", [](SweepArgs& a, const std::string& v) { a.out = v; }},
      {"collect-diagnostics", [](SweepArgs& a, const std::string& v) { a.collect_diagnostics = parse_bool(v); }},
      {"timings", [](SweepArgs& a, const std::string& v) { a.timings = parse_bool(v); }},
  };
}

/// n = 512, d = 2, p = 0.5, 100 trials per point, five-point sigma grid.
inline const std::map<std::string, std::string>& preset_defaults() {
  static const std::map<std::string, std::string> kDefaults{
      {"n", "512"},      {"d", "2"}, {"p", "0.5"}, {"sigmas", "1.5,1.25,1.0,0.75,0.5"},
      {"trials", "100"}, {"methods", "vanilla,anchored"}};
  return kDefaults;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  ::permsync::detail::write_file(path, text);
}

inline std::string read_text(const std::filesystem::path& path) { return ::permsync::detail::read_file(path); }

}  // namespace detail

/// Runs the CLI with the given arguments (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"permsync: spectral permutation synchronization", "permsync"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  // gen / solve share the model flags.
  ModelParams model;
  model.n = 64;
  std::string truth_mode = "random";
  auto add_model_flags = [&](CLI::App* sub) {
    sub->add_option("--n", model.n, "number of objects");
    sub->add_option("--d", model.d, "permutation dimension");
    sub->add_option("--p", model.p, "observation probability in (0, 1]");
    sub->add_option("--sigma", model.sigma, "noise level");
    sub->add_option("--seed", model.seed, "random seed");
    sub->add_option("--truth-mode", truth_mode, "latent permutations: random | identity");
  };

  // Eigensolver controls shared by solve and sweep.
  EigOptions eig_opts;
  std::string eig_method = "auto";
  auto add_eig_flags = [&](CLI::App* sub) {
    sub->add_option("--eig-tol", eig_opts.tol, "eigensolver relative residual tolerance");
    sub->add_option("--eig-max-blocks", eig_opts.max_blocks, "eigensolver block-step budget (0 = 50 * d)");
    sub->add_option("--eig-method", eig_method, "auto | lanczos | dense")
        ->check(CLI::IsMember({"auto", "lanczos", "dense"}));
  };
  auto resolve_eig = [&] {
    eig_opts.method = eig_method == "lanczos" ? EigMethod::lanczos
                      : eig_method == "dense" ? EigMethod::dense
                                              : EigMethod::automatic;
    return eig_opts;
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic instance");
  add_model_flags(gen);
  std::string gen_out = "instance.bin";
  gen->add_option("--out", gen_out, "output path (.json for JSON, binary otherwise)");

  auto* solve = app.add_subcommand("solve", "estimate permutations for one instance");
  add_model_flags(solve);
  std::string solve_in;
  std::string method = "anchored";
  std::string solve_out = "estimates.csv";
  std::string dump_eigenspace;
  std::size_t restarts = 10;
  solve->add_option("--in", solve_in, "instance file; when absent the instance is generated from the model flags");
  solve->add_option("--method", method, "vanilla | anchored");
  solve->add_option("--out", solve_out, "estimates CSV path");
  solve->add_option("--restarts", restarts, "k-means restarts");
  add_eig_flags(solve);
  solve->add_option("--dump-eigenspace", dump_eigenspace, "write U as CSV (one row per coordinate)");

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over a sigma grid");
  detail::SweepArgs sa;
  std::string config_path;
  bool use_preset = false;
  std::map<std::string, CLI::Option*> sweep_opts;
  sweep_opts["n"] = sweep->add_option("--n", sa.n, "number of objects");
  sweep_opts["d"] = sweep->add_option("--d", sa.d, "permutation dimension");
  sweep_opts["p"] = sweep->add_option("--p", sa.p, "observation probability");
  sweep_opts["sigmas"] = sweep->add_option("--sigmas,--sigma", sa.sigmas, "comma-separated sigma grid")->delimiter(',');
  sweep_opts["trials"] = sweep->add_option("--trials", sa.trials, "trials per grid point");
  sweep_opts["methods"] = sweep->add_option("--methods", sa.methods, "comma-separated methods")->delimiter(',');
  sweep_opts["parallelism"] = sweep->add_option("--parallelism", sa.parallelism, "worker threads");
  sweep_opts["seed"] = sweep->add_option("--seed", sa.seed, "master seed");
  sweep_opts["truth-mode"] = sweep->add_option("--truth-mode", sa.truth_mode, "random | identity");
  sweep_opts["out"] = sweep->add_option("--out", sa.out, "output directory for raw.csv and summary.csv");
  sweep_opts["collect-diagnostics"] =
      sweep->add_flag("--collect-diagnostics", sa.collect_diagnostics, "record gap and error diagnostics");
  sweep_opts["timings"] = sweep->add_flag("--timings", sa.timings, "record per-stage wall times (not reproducible)");
  add_eig_flags(sweep);
  sweep->add_option("--config", config_path, "flat key = value file; command-line flags take precedence");
  sweep->add_flag("--paper-default", use_preset, "n=512 d=2 p=0.5 sigmas=1.5..0.5 trials=100");

  auto* plot = app.add_subcommand("plot", "render an SVG from a summary CSV");
  std::string plot_in, plot_out = "plot.svg", style = "lines";
  plot->add_option("--in", plot_in, "summary CSV")->required();
  plot->add_option("--style", style, "lines | box")->check(CLI::IsMember({"lines", "box"}));
  plot->add_option("--out", plot_out, "output SVG path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      model.truth_mode = parse_truth_mode(truth_mode);
      const Instance inst = generate(model);
      save_instance(inst, gen_out);
      out << "observed pairs: " << inst.observed_pairs() << "\n";
      out << "wrote " << gen_out << " (" << std::filesystem::file_size(gen_out) << " bytes)\n";
      return kExitOk;
    }

    if (solve->parsed()) {
      const Method m = parse_method(method);
      Instance inst;
      if (!solve_in.empty()) {
        inst = load_instance(solve_in);
      } else {
        model.truth_mode = parse_truth_mode(truth_mode);
        inst = generate(model);
      }
      EigOptions eo = resolve_eig();
      eo.seed = derive_seed(inst.params().seed, 0, 0, StreamRole::eigen_start);
      ::permsync::detail::require(inst.n() >= 2, "solve: need n >= 2");
      const Eigenspace es = top_eigenpairs(inst, inst.d(), eo);
      EstimateSet est;
      if (m == Method::vanilla) {
        est = vanilla_estimate(es);
      } else {
        ClusterConfig cc;
        cc.restarts = restarts;
        cc.seed = derive_seed(inst.params().seed, 0, 0, StreamRole::cluster);
        est = anchored_estimate(es, build_anchor(es, cc));
      }
      detail::write_text(solve_out, estimates_to_csv(est.perms));
      if (!dump_eigenspace.empty()) {
        std::string csv = "row,block,offset";
        for (std::size_t c = 0; c < es.count(); ++c) csv += ",u_" + std::to_string(c);
        csv += '\n';
        for (Eigen::Index r = 0; r < es.u.rows(); ++r) {
          csv += std::to_string(r) + ',' + std::to_string(r / static_cast<Eigen::Index>(es.block_dim)) + ',' +
                 std::to_string(r % static_cast<Eigen::Index>(es.block_dim));
          for (Eigen::Index c = 0; c < es.u.cols(); ++c) csv += ',' + format_double(es.u(r, c));
          csv += '\n';
        }
        detail::write_text(dump_eigenspace, csv);
      }
      out << "method: " << to_string(m) << "\n";
      out << "lambda:";
      for (double l : es.lambdas) out << ' ' << format_fixed(l, 6);
      out << "\n";
      if (inst.has_truth()) out << "loss " << format_fixed(hamming_loss(est.perms, inst.truth()), 6) << "\n";
      out << "wrote " << solve_out << "\n";
      return kExitOk;
    }

    if (sweep->parsed()) {
      // Precedence: command line > config file > --paper-default > built-ins.
      std::map<std::string, std::string> layered;
      if (use_preset) layered = detail::preset_defaults();
      if (!config_path.empty())
        for (const auto& [k, v] : read_config(config_path)) layered[k] = v;
      const auto setters = detail::sweep_setters();
      for (const auto& [key, value] : layered) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw FormatError("unknown config key '" + key + "'");
        if (sweep_opts.at(key)->count() == 0) it->second(sa, value);
      }

      SweepSpec spec;
      spec.base.n = sa.n;
      spec.base.d = sa.d;
      spec.base.p = sa.p;
      spec.base.truth_mode = parse_truth_mode(sa.truth_mode);
      spec.sigma_grid = sa.sigmas;
      spec.trials = sa.trials;
      spec.parallelism = sa.parallelism;
      spec.master_seed = sa.seed;
      spec.trial.methods.clear();
      for (const auto& s : sa.methods) spec.trial.methods.push_back(parse_method(s));
      spec.trial.collect_diagnostics = sa.collect_diagnostics;
      spec.trial.record_timings = sa.timings;
      spec.trial.eig = resolve_eig();
      spec.validate();

      const SweepResult res = run_sweep(spec);
      std::filesystem::create_directories(sa.out);
      const auto raw_path = std::filesystem::path(sa.out) / "raw.csv";
      const auto summary_path = std::filesystem::path(sa.out) / "summary.csv";
      detail::write_text(raw_path, raw_csv(res.trials, spec.trial.methods));
      detail::write_text(summary_path, summary_csv(res.summary));

      out << std::left << std::setw(10) << "sigma" << std::setw(10) << "method" << std::right << std::setw(12)
          << "mean" << std::setw(12) << "median" << std::setw(12) << "q1" << std::setw(12) << "q3" << std::setw(7)
          << "ok" << std::setw(7) << "fail" << "\n";
      bool empty_cell = false;
      for (const auto& row : res.summary.rows) {
        out << std::left << std::setw(10) << format_double(row.sigma) << std::setw(10) << to_string(row.method)
            << std::right;
        if (row.stats) {
          out << std::setw(12) << format_fixed(row.stats->mean, 6) << std::setw(12)
              << format_fixed(row.stats->median, 6) << std::setw(12) << format_fixed(row.stats->q1, 6)
              << std::setw(12) << format_fixed(row.stats->q3, 6);
        } else {
          empty_cell = true;
          out << std::setw(12) << "-" << std::setw(12) << "-" << std::setw(12) << "-" << std::setw(12) << "-";
        }
        out << std::setw(7) << row.n_ok << std::setw(7) << row.n_fail << "\n";
      }
      out << "wrote " << raw_path.string() << " and " << summary_path.string() << "\n";
      if (empty_cell) {
        err << "error: at least one grid cell has no successful trial\n";
        return kExitPartial;
      }
      return kExitOk;
    }

    if (plot->parsed()) {
      const auto rows = parse_summary_csv(detail::read_text(plot_in));
      detail::write_text(plot_out, render_svg(rows, style == "box" ? PlotStyle::box : PlotStyle::lines));
      out << "wrote " << plot_out << "\n";
      return kExitOk;
    }
  } catch (const ConvergenceError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace permsync::cli
