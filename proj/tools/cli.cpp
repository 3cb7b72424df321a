#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "experiment.hpp"
#include "spmbd/errors.hpp"
#include "spmbd/vug.hpp"

#ifndef SPMBD_GIT_VERSION
#define SPMBD_GIT_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace spmbd::tools {
namespace {

constexpr int kUsageError = 2;
constexpr int kRunError = 1;
constexpr int kContaminated = 3;

const std::set<std::string> kBooleanKeys{"strict", "self-convergence", "no-wall-time"};

const double kUnset = std::numeric_limits<double>::quiet_NaN();

struct Common {
  std::string problem;
  std::size_t dim = 0;
  double T = kUnset;
  double n_a = 3.0;
  std::string out = ".";
  unsigned threads = default_threads();
  std::size_t chunk = std::size_t{1} << 16;
  bool no_wall_time = false;
  std::string config_file;
};

struct Defaults {
  std::size_t dim;
  double tau, h, T;
};

Defaults defaults_for(const std::string& problem) {
  if (problem == "allen-cahn") return {2, 0.1, 0.4, 2.0};
  return {1, 0.1, 0.1, 10.0};
}

std::string join_list(const std::vector<std::string>& parts, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

template <class T>
std::string join_numbers(const std::vector<T>& values) {
  std::vector<std::string> parts;
  for (const T& v : values) {
    std::ostringstream os;
    os << v;
    parts.push_back(os.str());
  }
  return join_list(parts, ",");
}

std::string format(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Appends key=value lines from --config for every flag not already given.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::string> merged = args;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(number) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    if (kBooleanKeys.count(key)) {
      if (value == "true" || value == "1" || value == "yes") merged.push_back(flag);
    } else {
      merged.push_back(flag);
      merged.push_back(value);
    }
  }
  return merged;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--problem", c.problem, "benchmark1d or allen-cahn")->required();
  cmd->add_option("--dim", c.dim, "dimension (default 1 for benchmark1d, 2 for allen-cahn)");
  cmd->add_option("--T", c.T, "final time");
  cmd->add_option("--na", c.n_a, "annihilation threshold factor n_a");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--threads", c.threads, "worker threads (default $SPMBD_THREADS or all cores)");
  cmd->add_option("--chunk", c.chunk, "particles per random-stream chunk");
  cmd->add_flag("--no-wall-time", c.no_wall_time, "omit wall-clock columns so CSVs are byte-reproducible");
  cmd->add_option("--config", c.config_file, "key=value file; command-line flags win");
}

std::size_t to_count(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 9.0e15) {
    throw ConfigError(std::string(what) + " must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

ProblemSpec resolve_problem(Common& c) {
  const Defaults d = defaults_for(c.problem);
  if (c.dim == 0) c.dim = d.dim;
  if (std::isnan(c.T)) c.T = d.T;
  return make_problem(c.problem, c.dim);
}

SolverConfig base_config(const Common& c) {
  SolverConfig cfg;
  cfg.T = c.T;
  cfg.n_a = c.n_a;
  cfg.exec = Exec{std::max(1u, c.threads), c.chunk};
  return cfg;
}

fs::path prepare_out(const Common& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory " + c.out + " is not writable");
  return dir;
}

std::string comment(const std::string& invocation, const std::string& seeds) {
  return "# " + invocation + " | seed=" + seeds + "\n";
}

std::string threads_env() {
  const char* env = std::getenv("SPMBD_THREADS");
  return env ? env : "unset";
}

// --- run ---------------------------------------------------------------------

struct RunFlags {
  Common common;
  std::string method = "birth_death";
  double n0 = 10000;
  double tau = kUnset;
  double h = kUnset;
  std::uint64_t seed = 1;
  std::size_t report_every = 10;
};

int cmd_run(RunFlags& f, const std::string& invocation, std::ostream& out) {
  Common& c = f.common;
  const ProblemSpec problem = resolve_problem(c);
  const Defaults d = defaults_for(c.problem);
  SolverConfig cfg = base_config(c);
  cfg.method = parse_method(f.method);
  cfg.n0 = to_count(f.n0, "--n0");
  cfg.tau = std::isnan(f.tau) ? d.tau : f.tau;
  cfg.h = std::isnan(f.h) ? d.h : f.h;
  cfg.seed = f.seed;
  cfg.validate();
  if (f.report_every == 0) throw ConfigError("--report-every must be positive");
  cfg.report_times = default_report_times(cfg.tau, cfg.T, f.report_every);
  const fs::path dir = prepare_out(c);

  ReferenceCache cache;
  const RunRecord record = run(problem, cfg, error_evaluator(problem, cfg, cache));
  const std::string head = comment(invocation, std::to_string(cfg.seed));

  std::ostringstream run_csv;
  run_csv << head;
  write_run_csv(run_csv, record, !c.no_wall_time);
  write_atomic(dir / "run.csv", run_csv.str());

  if (problem.dim >= 2) {
    std::ostringstream proj;
    proj << head;
    write_projection_csv(proj, project_2d(*record.final_ensemble, cfg.h, ProjectionBounds{}, cfg.exec));
    write_atomic(dir / "projection.csv", proj.str());
  } else {
    std::ostringstream rec;
    rec << head;
    write_grid_csv(rec, *record.final_grid);
    write_atomic(dir / "reconstruction.csv", rec.str());
  }

  const double final_error = record.errors.empty() ? kUnset : record.errors.back().second;
  std::ostringstream meta;
  meta << "version=" << SPMBD_GIT_VERSION << "\n"
       << "command=" << invocation << "\n"
       << "problem=" << problem.name << "\n"
       << "dim=" << problem.dim << "\n"
       << "method=" << to_string(cfg.method) << "\n"
       << "n0=" << cfg.n0 << "\n"
       << "tau=" << format(cfg.tau) << "\n"
       << "h=" << format(cfg.h) << "\n"
       << "T=" << format(cfg.T) << "\n"
       << "n_a=" << format(cfg.n_a) << "\n"
       << "seed=" << cfg.seed << "\n"
       << "threads=" << cfg.exec.threads << "\n"
       << "chunk_size=" << cfg.exec.chunk_size << "\n"
       << "SPMBD_THREADS=" << threads_env() << "\n"
       << "report_times=" << join_numbers(cfg.report_times) << "\n"
       << "initial_acceptance_rate=" << format(record.initial_acceptance_rate) << "\n"
       << "total_wall_ms=" << format(record.total_wall_ms) << "\n"
       << "final_error=" << format(final_error) << "\n";
  write_atomic(dir / "meta.txt", meta.str());

  out << "final error at T=" << cfg.T << ": " << final_error << " (" << record.rows.back().particle_count
      << " particles, " << record.total_wall_ms / 1000.0 << " s)\n";
  return 0;
}

// --- convergence -------------------------------------------------------------

struct SweepFlags {
  Common common;
  std::string method = "birth_death";
  std::vector<double> n0{10000};
  std::vector<double> tau;
  std::vector<double> h;
  std::vector<std::uint64_t> seeds{1};
};

struct Pair {
  double parameter;
  double error;
};

std::vector<Pair> seed_means(const std::vector<double>& params, const std::vector<SweepResult>& results,
                             std::size_t seeds) {
  std::vector<Pair> means;
  for (std::size_t p = 0; p < params.size(); ++p) {
    double sum = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) sum += results[p * seeds + s].error;
    means.push_back({params[p], sum / static_cast<double>(seeds)});
  }
  return means;
}

int cmd_convergence(SweepFlags& f, const std::string& invocation, std::ostream& out) {
  Common& c = f.common;
  const ProblemSpec problem = resolve_problem(c);
  const Defaults d = defaults_for(c.problem);
  if (f.tau.empty()) f.tau = {d.tau};
  if (f.h.empty()) f.h = {d.h};
  if (f.seeds.empty()) throw ConfigError("--seeds must not be empty");
  const int varying = (f.n0.size() > 1) + (f.tau.size() > 1) + (f.h.size() > 1);
  if (varying > 1) throw CLI::ValidationError("convergence", "exactly one of --n0, --tau, --h may vary");
  if (f.n0.empty()) throw ConfigError("--n0 must not be empty");

  std::string name = "n0";
  std::vector<double> params = f.n0;
  Refinement refinement = Refinement::kSampleSize;
  if (f.tau.size() > 1) {
    name = "tau";
    params = f.tau;
    refinement = Refinement::kResolution;
  } else if (f.h.size() > 1) {
    name = "h";
    params = f.h;
    refinement = Refinement::kResolution;
  }

  std::vector<SolverConfig> configs;
  for (double p : params) {
    for (std::uint64_t seed : f.seeds) {
      SolverConfig cfg = base_config(c);
      cfg.method = parse_method(f.method);
      cfg.n0 = to_count(name == "n0" ? p : f.n0.front(), "--n0");
      cfg.tau = name == "tau" ? p : f.tau.front();
      cfg.h = name == "h" ? p : f.h.front();
      cfg.seed = seed;
      cfg.validate();
      configs.push_back(cfg);
    }
  }
  const fs::path dir = prepare_out(c);
  ReferenceCache cache;
  const auto results = run_sweep(problem, configs, std::max(1u, c.threads), cache);
  const std::string head = comment(invocation, join_numbers(f.seeds));

  std::ostringstream conv;
  conv << head << "parameter,seed,error" << (c.no_wall_time ? "" : ",wall_ms") << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < results.size(); ++i) {
    conv << params[i / f.seeds.size()] << ',' << configs[i].seed << ',' << results[i].error;
    if (!c.no_wall_time) conv << ',' << results[i].wall_ms;
    conv << '\n';
  }
  write_atomic(dir / "convergence.csv", conv.str());

  const auto means = seed_means(params, results, f.seeds.size());
  std::ostringstream orders;
  orders << head << "parameter_from,parameter_to,mean_error_from,mean_error_to,order\n" << std::setprecision(17);
  if (means.size() > 1) {
    std::vector<std::pair<double, double>> points;
    for (const Pair& m : means) points.emplace_back(m.parameter, m.error);
    const auto o = convergence_order(points, refinement);
    for (std::size_t i = 0; i < o.size(); ++i) {
      orders << means[i].parameter << ',' << means[i + 1].parameter << ',' << means[i].error << ','
             << means[i + 1].error << ',' << o[i] << '\n';
      out << name << " " << means[i].parameter << " -> " << means[i + 1].parameter << ": order " << o[i] << "\n";
    }
  }
  write_atomic(dir / "orders.csv", orders.str());
  for (const Pair& m : means) out << name << "=" << m.parameter << " mean error " << m.error << "\n";
  return 0;
}

// --- compare -----------------------------------------------------------------

struct CompareFlags {
  Common common;
  std::vector<double> spm_n0;
  std::vector<double> bd_n0;
  double tau = kUnset;
  double h = kUnset;
  std::vector<std::uint64_t> seeds{1};
};

int cmd_compare(CompareFlags& f, const std::string& invocation, std::ostream& out) {
  Common& c = f.common;
  const ProblemSpec problem = resolve_problem(c);
  const Defaults d = defaults_for(c.problem);
  if (f.spm_n0.empty() && f.bd_n0.empty()) {
    throw CLI::ValidationError("compare", "give --spm-n0 and/or --bd-n0");
  }
  if (!f.spm_n0.empty() && !f.bd_n0.empty() && f.spm_n0.size() != f.bd_n0.size()) {
    throw CLI::ValidationError("compare", "--spm-n0 and --bd-n0 must pair up one to one");
  }
  if (f.seeds.empty()) throw ConfigError("--seeds must not be empty");

  struct Planned {
    Method method;
    double n0;
  };
  std::vector<Planned> plan;
  for (double n : f.spm_n0) plan.push_back({Method::kBaselineSpm, n});
  for (double n : f.bd_n0) plan.push_back({Method::kBirthDeath, n});
  std::vector<SolverConfig> configs;
  for (const Planned& p : plan) {
    for (std::uint64_t seed : f.seeds) {
      SolverConfig cfg = base_config(c);
      cfg.method = p.method;
      cfg.n0 = to_count(p.n0, "--spm-n0/--bd-n0");
      cfg.tau = std::isnan(f.tau) ? d.tau : f.tau;
      cfg.h = std::isnan(f.h) ? d.h : f.h;
      cfg.seed = seed;
      cfg.validate();
      configs.push_back(cfg);
    }
  }
  const fs::path dir = prepare_out(c);
  ReferenceCache cache;
  const auto results = run_sweep(problem, configs, std::max(1u, c.threads), cache);
  const std::string head = comment(invocation, join_numbers(f.seeds));

  std::ostringstream eff;
  eff << head << "method,n0,seed,error" << (c.no_wall_time ? "" : ",wall_ms") << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < results.size(); ++i) {
    eff << to_string(configs[i].method) << ',' << configs[i].n0 << ',' << configs[i].seed << ',' << results[i].error;
    if (!c.no_wall_time) eff << ',' << results[i].wall_ms;
    eff << '\n';
  }
  write_atomic(dir / "efficiency.csv", eff.str());
  if (f.spm_n0.empty() || f.bd_n0.empty()) return 0;

  const std::size_t seeds = f.seeds.size();
  const auto mean = [&](std::size_t entry, bool wall) {
    double s = 0.0;
    for (std::size_t k = 0; k < seeds; ++k) s += wall ? results[entry * seeds + k].wall_ms : results[entry * seeds + k].error;
    return s / static_cast<double>(seeds);
  };
  std::ostringstream pairs;
  pairs << head << "pair,spm_n0,bd_n0,spm_error,bd_error" << (c.no_wall_time ? "" : ",spm_wall_ms,bd_wall_ms")
        << ",bd_better\n"
        << std::setprecision(17);
  std::size_t wins = 0;
  const std::size_t n = f.spm_n0.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double es = mean(i, false), eb = mean(n + i, false);
    const bool better = eb < es;
    wins += better;
    pairs << i << ',' << f.spm_n0[i] << ',' << f.bd_n0[i] << ',' << es << ',' << eb;
    if (!c.no_wall_time) pairs << ',' << mean(i, true) << ',' << mean(n + i, true);
    pairs << ',' << (better ? 1 : 0) << '\n';
  }
  write_atomic(dir / "pairs.csv", pairs.str());
  out << "birth-death error lower in " << wins << " of " << n << " matched pairs\n";
  return 0;
}

// --- reference ---------------------------------------------------------------

struct ReferenceFlags {
  std::string problem;
  double T = 10.0;
  double tau_ref = 1e-3;
  double half_width = 64.0;
  std::size_t modes = std::size_t{1} << 14;
  std::vector<double> times;
  bool strict = false;
  bool self_convergence = false;
  std::string out = ".";
  std::string config_file;
};

int cmd_reference(ReferenceFlags& f, const std::string& invocation, std::ostream& out, std::ostream& err) {
  if (f.problem != "benchmark1d") throw ConfigError("reference supports --problem benchmark1d only");
  if (f.times.empty()) f.times = {f.T};
  reference::ReferenceSolution::Options opts;
  opts.half_width = f.half_width;
  opts.n_modes = f.modes;
  opts.tau = f.tau_ref;
  Common c;
  c.out = f.out;
  const fs::path dir = prepare_out(c);
  const auto ref = reference::ReferenceSolution::benchmark(f.times, opts);
  const std::string head = comment(invocation, "none");

  std::ostringstream csv;
  csv << head;
  write_reference_csv(csv, ref);
  write_atomic(dir / "reference.csv", csv.str());

  int code = 0;
  if (!ref.boundary_clean()) {
    err << "warning: reference touches the domain boundary (|u| > 1e-10 of max); enlarge --half-width\n";
    if (f.strict) code = kContaminated;
  }
  if (f.self_convergence) {
    const double T = *std::max_element(f.times.begin(), f.times.end());
    const auto solve = [&](double tau) {
      return reference::strang_run(reference::sample(benchmark::initial_value, f.half_width, f.modes), tau, T);
    };
    const auto a = solve(f.tau_ref), b = solve(f.tau_ref / 2), c4 = solve(f.tau_ref / 4);
    const double d1 = reference::relative_l2(a, b), d2 = reference::relative_l2(b, c4);
    const double order = std::log2(d1 / d2);
    std::ostringstream sc;
    sc << head << "tau,difference_to_half_step,order\n"
       << std::setprecision(17) << f.tau_ref << ',' << d1 << ",\n"
       << f.tau_ref / 2 << ',' << d2 << ',' << order << '\n';
    write_atomic(dir / "self_convergence.csv", sc.str());
    out << "self-convergence order: " << order << "\n";
  }
  return code;
}

}  // namespace

int cli_main(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic particle solver with birth-death dynamics", "spmbd"};
  app.set_help_flag("--help", "print this help");  // -h would clash with --h
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(SPMBD_GIT_VERSION));

  RunFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "one solver run");
  add_common(run_cmd, run_flags.common);
  run_cmd->add_option("--method", run_flags.method, "birth_death or baseline_spm");
  run_cmd->add_option("--n0", run_flags.n0, "initial sample size");
  run_cmd->add_option("--tau", run_flags.tau, "time step");
  run_cmd->add_option("--h", run_flags.h, "cell side");
  run_cmd->add_option("--seed", run_flags.seed, "master seed");
  run_cmd->add_option("--report-every", run_flags.report_every, "steps between error reports");

  SweepFlags sweep;
  CLI::App* conv_cmd = app.add_subcommand("convergence", "sweep one of n0, tau, h across seeds");
  add_common(conv_cmd, sweep.common);
  conv_cmd->add_option("--method", sweep.method, "birth_death or baseline_spm");
  conv_cmd->add_option("--n0", sweep.n0, "initial sample sizes")->delimiter(',');
  conv_cmd->add_option("--tau", sweep.tau, "time steps")->delimiter(',');
  conv_cmd->add_option("--h", sweep.h, "cell sides")->delimiter(',');
  conv_cmd->add_option("--seeds,--seed", sweep.seeds, "seeds")->delimiter(',');

  CompareFlags compare;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "error against wall time for both methods");
  add_common(cmp_cmd, compare.common);
  cmp_cmd->add_option("--spm-n0", compare.spm_n0, "baseline SPM sample sizes")->delimiter(',');
  cmp_cmd->add_option("--bd-n0", compare.bd_n0, "birth-death sample sizes")->delimiter(',');
  cmp_cmd->add_option("--tau", compare.tau, "time step");
  cmp_cmd->add_option("--h", compare.h, "cell side");
  cmp_cmd->add_option("--seeds,--seed", compare.seeds, "seeds")->delimiter(',');

  ReferenceFlags ref_flags;
  CLI::App* ref_cmd = app.add_subcommand("reference", "deterministic Strang reference for benchmark1d");
  ref_cmd->add_option("--problem", ref_flags.problem, "benchmark1d")->required();
  ref_cmd->add_option("--T", ref_flags.T, "final time");
  ref_cmd->add_option("--tau-ref", ref_flags.tau_ref, "splitting time step");
  ref_cmd->add_option("--half-width", ref_flags.half_width, "periodic domain is [-L, L)");
  ref_cmd->add_option("--modes", ref_flags.modes, "number of Fourier modes (power of two)");
  ref_cmd->add_option("--times", ref_flags.times, "snapshot times (default T)")->delimiter(',');
  ref_cmd->add_flag("--strict", ref_flags.strict, "exit 3 if the solution reaches the boundary");
  ref_cmd->add_flag("--self-convergence", ref_flags.self_convergence, "report the observed order at tau, tau/2, tau/4");
  ref_cmd->add_option("--out", ref_flags.out, "output directory");
  ref_cmd->add_option("--config", ref_flags.config_file, "key=value file; command-line flags win");

  const std::string invocation = join_list(raw_args, " ");
  try {
    std::vector<std::string> args = merge_config(raw_args);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
    if (*run_cmd) return cmd_run(run_flags, invocation, out);
    if (*conv_cmd) return cmd_convergence(sweep, invocation, out);
    if (*cmp_cmd) return cmd_compare(compare, invocation, out);
    if (*ref_cmd) return cmd_reference(ref_flags, invocation, out, err);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kRunError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRunError;
  }
  return kUsageError;
}

}  // namespace spmbd::tools
