#pragma once

// Command-line front end: parse-case, estimate, tune, bench-opt.
// Exit codes: 0 ok, 2 config or usage, 3 parse, 4 runtime.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rdse/benchmarks.hpp"
#include "rdse/config.hpp"

namespace rdse::cli {

enum Exit : int { ok = 0, usage = 2, parse = 3, runtime = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const char* config_reference() {
  return R"(Config file (YAML, schema 1). Unknown keys are rejected at every level.
  schema: 1
  network: <path>                      relative to the config file, then the bundled data dir
  plan: default | [<descriptor>, ...]  e.g. "Vmag 3", "Pinj 4", "Qinj 4", "Pflow 1-2", "Qflow 4-7"
  scenario: <preset> | mapping
    preset: scenario1|scenario2|scenario3|scenario4|noise_free
    name: <label>
    process, measurement:
      mixture: [{weight, mean, variance}, ...]
      impulse_prob, impulse_scale, component_fraction
    bad_data: [{t, multiplier}, ...]   scales every power entry at step t
  experiment:
    experiments, horizon, seed, jobs (0 = all cores)
    rmse_convention: as_printed | inside_root
    holt: {level, trend}
    init: {p00, q0, r0, perturb_initial}
  filters: [ mapping, ... ]           default: every preset
    name, preset: UKF|MCC-UKF|MEE-UKF|MEEF-UKF|GMMEEF-AUKF|AUKF
    overlay: <tuning overlay file>
    ut: {alpha, beta, lambda}
    criterion:
      mode: GMMEEF|MEEF|MEE|MCC|GAUSSIAN
      kappa, phi, gap_floor
      fiducial1, fiducial2, entropy: {shape, bandwidth}
      lambda_prefactor: as_printed | kernel_gradient
    adapt_noise, theta_mode (constant|forgetting), theta, forgetting
    fixed_point_tol, fixed_point_max_iters, fallback_on_divergence, noise_floor
  tune:
    filter: <filter name or preset>
    optimizer: {variant (SGA|ISGA|BAT|PSO), population, max_iters, f_min, f_max, seed,
                damping (as_printed|exp_ratio), jobs}
    bounds: {lo: [9 values], hi: [9 values]}
      order: ut_alpha ut_beta shape1 shape2 shape3 bandwidth1 bandwidth2 bandwidth3 theta
    budget: {experiments, horizon, seed}
  bench:
    variants: [SGA, ISGA, BAT, PSO], functions: [1..23], dim, seeds
    optimizer: {population, max_iters, f_min, f_max, seed, damping, jobs}
  output: {dir, formats: [csv, jsonl]}
)";
}

namespace detail {

inline std::string csv_banner(const std::string& config_hash, std::uint64_t seed) {
  return "# rdse schema " + std::to_string(kConfigSchemaVersion) + " config " + config_hash + " seed " +
         std::to_string(seed) + "\n";
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

inline void write_run_outputs(const RunReport& r, const std::filesystem::path& dir,
                              const std::vector<std::string>& formats) {
  for (const auto& fmt : formats) {
    if (fmt == "csv") {
      const std::string banner = csv_banner(r.config_hash, r.base_seed);
      auto a = open_out(dir / "summary.csv");
      a << banner;
      write_summary_csv(r, a);
      auto b = open_out(dir / "series.csv");
      b << banner;
      write_series_csv(r, b);
      auto c = open_out(dir / "diagnostics.csv");
      c << banner;
      write_diagnostics_csv(r, c);
    } else {
      auto j = open_out(dir / "report.jsonl");
      write_report_jsonl(r, j);
    }
  }
}

inline void print_summary(const RunReport& r, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %12s %12s %10s %9s %9s\n", "filter", "ARMSE(V)", "ARMSE(phi)", "ms/step",
                "fallback", "failed");
  out << line;
  for (const auto& f : r.filters) {
    std::snprintf(line, sizeof line, "%-24s %12.6g %12.6g %10.3f %9ld %9ld\n", f.name.c_str(), f.armse_v, f.armse_phi,
                  f.mean_step_ms, f.fallbacks, f.failed_steps);
    out << line;
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string out;
  std::string format;
};

inline int cmd_parse_case(const std::string& path, std::ostream& out) {
  const PowerNetwork net = load_cdf(path);
  out << net.bus_count() << " buses, " << net.branch_count() << " branches\n";
  out << network_to_json(net).dump(2) << "\n";
  return ok;
}

inline RunConfig load_with_flags(const CommonFlags& fl, std::optional<int> experiments, std::optional<int> horizon) {
  if (fl.config.empty()) throw UsageError("--config is required");
  RunConfig c = load_config(fl.config);
  if (c.network_path.empty()) throw ConfigError("config: 'network' is required for this command");
  if (fl.seed) c.spec.base_seed = *fl.seed;
  if (fl.jobs) c.spec.jobs = *fl.jobs;
  if (experiments) c.spec.experiments = *experiments;
  if (horizon) c.spec.horizon = *horizon;
  if (!fl.out.empty()) c.output.dir = fl.out;
  if (!fl.format.empty()) c.output.formats = {fl.format};
  try {
    c.spec.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

/// Runs each filter on the same paired draws; a filter that throws stops the run after the
/// completed filters have been written.
inline int cmd_estimate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  RunReport all;
  int code = ok;
  for (const auto& nf : c.spec.filters) {
    ExperimentSpec s = c.spec;
    s.filters = {nf};
    try {
      RunReport r = run_experiment(s);
      if (all.filters.empty()) {
        all = r;
      } else {
        all.filters.push_back(r.filters.front());
      }
    } catch (const std::exception& e) {
      err << "error: filter '" << nf.name << "' failed: " << e.what() << "\n";
      code = runtime;
      break;
    }
  }
  if (all.filters.empty()) {
    all.scenario = c.spec.scenario.name;
    all.network = c.spec.network.title;
    all.base_seed = c.spec.base_seed;
    all.experiments = c.spec.experiments;
    all.horizon = c.spec.horizon;
    all.convention = to_string(c.spec.convention);
    all.config_hash = c.spec.config_hash;
  }
  detail::write_run_outputs(all, c.output.dir, c.output.formats);
  out << "scenario " << all.scenario << ", " << all.network << ", D=" << all.experiments << ", T=" << all.horizon
      << ", seed " << all.base_seed << ", schema " << kConfigSchemaVersion << ", config " << all.config_hash << "\n";
  detail::print_summary(all, out);
  if (code != ok) err << "partial report written to " << c.output.dir << "\n";
  return code;
}

inline int cmd_tune(RunConfig c, const CommonFlags& fl, std::ostream& out) {
  if (fl.seed) c.tune.optimizer.seed = *fl.seed;
  if (fl.jobs) c.tune.optimizer.jobs = std::max(1u, *fl.jobs);
  c.tune.optimizer.lo = c.tune.bounds.lo;
  c.tune.optimizer.hi = c.tune.bounds.hi;
  try {
    c.tune.optimizer.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("tune.optimizer: ") + e.what());
  }
  FilterConfig base;
  bool found = false;
  for (const auto& f : c.spec.filters)
    if (f.name == c.tune.filter) base = f.config, found = true;
  if (!found) base = filter_preset(c.tune.filter);

  const TuningResult r = tune_filter(c.spec, base, c.tune.optimizer, c.tune.budget, c.tune.bounds);
  const std::filesystem::path dir = c.output.dir;
  std::string stem = c.tune.filter;
  std::transform(stem.begin(), stem.end(), stem.begin(), [](unsigned char ch) { return std::tolower(ch); });
  const std::filesystem::path overlay = dir / ("tuned-" + stem + ".yaml");
  {
    auto f = detail::open_out(overlay);
    f << tuning_overlay_yaml(r, c.tune.filter, c.spec.config_hash, c.tune.optimizer.seed);
  }
  {
    auto f = detail::open_out(dir / "tune-curve.csv");
    f << detail::csv_banner(c.spec.config_hash, c.tune.optimizer.seed);
    f << "iteration,best_fitness\n";
    for (std::size_t k = 0; k < r.curve.size(); ++k) f << k + 1 << ',' << format_real(r.curve[k]) << '\n';
  }
  out << "tuned " << c.tune.filter << " with " << to_string(c.tune.optimizer.variant) << " ("
      << r.evaluations << " evaluations), schema " << kConfigSchemaVersion << "\n";
  out << "start fitness " << format_real(r.start_fitness) << ", tuned fitness " << format_real(r.fitness) << "\n";
  for (std::size_t k = 0; k < kTuningKeys.size(); ++k) out << "  " << kTuningKeys[k] << " = " << r.best(k) << "\n";
  out << "wrote " << overlay.string() << " and " << (dir / "tune-curve.csv").string() << "\n";
  return ok;
}

struct BenchFlags {
  std::string variants;
  std::string functions;
  std::optional<int> seeds;
  std::optional<Index> dim;
  std::optional<int> iters;
  std::optional<int> population;
};

inline int cmd_bench_opt(BenchSettings b, const BenchFlags& bf, const CommonFlags& fl, const std::string& config_hash,
                         std::ostream& out) {
  if (!bf.variants.empty()) {
    b.variants.clear();
    for (const auto& s : detail::split_list(bf.variants)) b.variants.push_back(optimizer_variant_from_string(s));
  }
  if (bf.functions != "\x01") {
    b.functions.clear();
    for (const auto& s : detail::split_list(bf.functions)) {
      std::string t = s;
      if (!t.empty() && (t[0] == 'F' || t[0] == 'f')) t.erase(0, 1);
      try {
        b.functions.push_back(std::stoi(t));
      } catch (const std::exception&) {
        throw UsageError("--functions: bad function id '" + s + "'");
      }
    }
  }
  if (bf.seeds) b.seeds = *bf.seeds;
  if (bf.dim) b.dim = *bf.dim;
  if (bf.iters) b.optimizer.max_iters = *bf.iters;
  if (bf.population) b.optimizer.population = *bf.population;
  if (fl.jobs) b.optimizer.jobs = std::max(1u, *fl.jobs);
  const std::uint64_t base_seed = fl.seed ? *fl.seed : b.optimizer.seed;
  if (b.functions.empty()) throw UsageError("bench-opt: empty function list");
  if (b.variants.empty()) throw UsageError("bench-opt: empty variant list");
  if (b.seeds < 1) throw UsageError("bench-opt: --seeds must be at least 1");
  for (int id : b.functions)
    if (id < 1 || id > 23) throw UsageError("bench-opt: function id " + std::to_string(id) + " outside 1..23");

  const std::string dir = fl.out.empty() ? std::string("out") : fl.out;
  auto med = detail::open_out(std::filesystem::path(dir) / "bench_medians.csv");
  auto runs = detail::open_out(std::filesystem::path(dir) / "bench_runs.csv");
  const std::string banner = detail::csv_banner(config_hash, base_seed);
  med << banner << "function,variant,dim,seeds,median,best,worst\n";
  runs << banner << "function,variant,seed,final_fitness\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-6s %14s %14s %14s\n", "func", "opt", "median", "best", "worst");
  out << line;
  for (int id : b.functions) {
    const Benchmark bm = benchmark(id, b.dim);
    for (auto v : b.variants) {
      std::vector<double> finals;
      for (int s = 0; s < b.seeds; ++s) {
        OptimizerConfig o = b.optimizer;
        o.variant = v;
        o.lo = bm.lower();
        o.hi = bm.upper();
        o.seed = base_seed + static_cast<std::uint64_t>(s);
        const Benchmark noisy = benchmark(id, b.dim, o.seed);
        const OptimizerResult r = optimize_benchmark(noisy, o);
        finals.push_back(r.best_fitness);
        runs << "F" << id << ',' << to_string(v) << ',' << o.seed << ',' << format_real(r.best_fitness) << '\n';
      }
      const double m = detail::median(finals);
      const auto [lo, hi] = std::minmax_element(finals.begin(), finals.end());
      med << "F" << id << ',' << to_string(v) << ',' << bm.dim << ',' << b.seeds << ',' << format_real(m) << ','
          << format_real(*lo) << ',' << format_real(*hi) << '\n';
      std::snprintf(line, sizeof line, "F%-5d %-6s %14.6g %14.6g %14.6g\n", id, to_string(v), m, *lo, *hi);
      out << line;
    }
  }
  return ok;
}

/// Entry point; `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust dynamic state estimation for power systems"};
  app.require_subcommand(1);
  app.footer(config_reference());
  CommonFlags fl;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", fl.config, "YAML run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", fl.seed, "override the base seed");
    sub->add_option("--jobs", fl.jobs, "worker threads (0 = all cores)");
    sub->add_option("--out", fl.out, "output directory");
    sub->add_option("--format", fl.format, "output format")->check(CLI::IsMember({"csv", "jsonl"}));
  };

  std::string case_path;
  auto* pc = app.add_subcommand("parse-case", "parse a MATPOWER-style case file and dump it as JSON");
  pc->add_option("path", case_path, "case file")->required();

  std::optional<int> experiments, horizon;
  auto* est = app.add_subcommand("estimate", "run the Monte Carlo comparison described by a config");
  add_common(est);
  est->add_option("--experiments", experiments, "override experiment.experiments");
  est->add_option("--horizon", horizon, "override experiment.horizon");

  auto* tune = app.add_subcommand("tune", "calibrate filter coefficients with a metaheuristic");
  add_common(tune);

  BenchFlags bf;
  bf.functions = "\x01";
  auto* bench = app.add_subcommand("bench-opt", "compare optimizers on the benchmark suite");
  add_common(bench);
  bench->add_option("--variants", bf.variants, "comma list of SGA,ISGA,BAT,PSO");
  bench->add_option("--functions", bf.functions, "comma list of function ids 1..23");
  bench->add_option("--seeds", bf.seeds, "seeds per (function, variant)");
  bench->add_option("--dim", bf.dim, "dimension of the scalable functions");
  bench->add_option("--iters", bf.iters, "iterations per run");
  bench->add_option("--population", bf.population, "population size");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (pc->parsed()) return cmd_parse_case(case_path, out);
    if (est->parsed()) return cmd_estimate(load_with_flags(fl, experiments, horizon), out, err);
    if (tune->parsed()) return cmd_tune(load_with_flags(fl, std::nullopt, std::nullopt), fl, out);
    if (bench->parsed()) {
      BenchSettings b;
      std::string hash = fingerprint("");
      if (!fl.config.empty()) {
        const RunConfig c = load_config(fl.config);
        b = c.bench;
        hash = c.spec.config_hash;
      }
      return cmd_bench_opt(b, bf, fl, hash, out);
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return parse;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return usage;
  } catch (const std::ios_base::failure& e) {
    std::string msg = e.what();
    msg = msg.substr(0, msg.find(": iostream error"));
    err << "error: " << msg << "\n";
    return usage;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return runtime;
  }
  return usage;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace rdse::cli
