#pragma once

// Monte Carlo runner: shared truth per experiment, paired filter comparison, ARMSE metrics, reports.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rdse/casefile.hpp"
#include "rdse/filters.hpp"
#include "rdse/noisegen.hpp"
#include "rdse/psmodel.hpp"
#include "rdse/rng.hpp"

#ifndef RDSE_VERSION
#define RDSE_VERSION "0.1.0"
#endif

namespace rdse {

enum class RmseConvention { as_printed, inside_root };

inline const char* to_string(RmseConvention c) { return c == RmseConvention::as_printed ? "as_printed" : "inside_root"; }

/// Per-time squared-error sums S_t (already summed over experiments and components) to one number.
/// as_printed: (1/N) sum_t sqrt(S_t / (A D)); inside_root: sqrt(sum_t S_t / (A D N)).
inline double armse_from_sums(const Vector& per_time_sums, Index components, Index experiments,
                              RmseConvention c = RmseConvention::as_printed) {
  const double n = static_cast<double>(per_time_sums.size());
  const double ad = static_cast<double>(components) * static_cast<double>(experiments);
  if (per_time_sums.size() == 0 || ad <= 0.0) throw ValidationError("ARMSE needs at least one sample");
  if (c == RmseConvention::inside_root) return std::sqrt(per_time_sums.sum() / (ad * n));
  return (per_time_sums.array() / ad).sqrt().sum() / n;
}

/// estimates[j][t] and truths[j][t] are experiment j, step t vectors of A components.
inline double armse(const std::vector<std::vector<Vector>>& estimates, const std::vector<std::vector<Vector>>& truths,
                    RmseConvention c = RmseConvention::as_printed) {
  if (estimates.size() != truths.size() || estimates.empty()) throw ValidationError("ARMSE shape mismatch");
  const std::size_t n = estimates[0].size();
  if (n == 0) throw ValidationError("ARMSE needs at least one step");
  const Index a = estimates[0][0].size();
  Vector sums = Vector::Zero(static_cast<Index>(n));
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    if (estimates[j].size() != n || truths[j].size() != n) throw ValidationError("ARMSE shape mismatch");
    for (std::size_t t = 0; t < n; ++t) {
      if (estimates[j][t].size() != a || truths[j][t].size() != a) throw ValidationError("ARMSE shape mismatch");
      sums(static_cast<Index>(t)) += (estimates[j][t] - truths[j][t]).squaredNorm();
    }
  }
  return armse_from_sums(sums, a, static_cast<Index>(estimates.size()), c);
}

struct NamedFilter {
  std::string name;
  FilterConfig config;
};

/// Filter initialization: P00 = p00 I, Q0 = q0 I, R0 = r0 I, and u_hat(0|0) = u0 + N(0, P00).
struct FilterInit {
  double p00 = 1e-2;
  double q0 = 1e-5;
  double r0 = 1e-2;
  bool perturb_initial = false;
};

struct ExperimentSpec {
  PowerNetwork network;
  MeasurementPlan plan;
  Scenario scenario;
  std::vector<NamedFilter> filters;
  int experiments = 200;
  int horizon = 60;
  std::uint64_t base_seed = 1;
  HoltParams holt;
  FilterInit init;
  RmseConvention convention = RmseConvention::as_printed;
  unsigned jobs = 0;  // 0: hardware concurrency
  std::string config_hash;

  void validate() const {
    if (experiments < 1 || horizon < 1) throw ValidationError("experiment count and horizon must be at least 1");
    if (filters.empty()) throw ValidationError("no filters to run");
    for (const auto& f : filters) f.config.validate();
    holt.validate();
    scenario.validate(horizon);
    validate_plan(plan, network);
    if (!(init.p00 > 0.0) || !(init.q0 >= 0.0) || !(init.r0 > 0.0))
      throw ValidationError("initial covariances must be positive");
  }
};

struct FilterReport {
  std::string name;
  std::string mode;
  Vector rmse_v;    // per-time RMSE of magnitudes
  Vector rmse_phi;  // per-time RMSE of phases
  double armse_v = 0.0;
  double armse_phi = 0.0;
  double mean_step_ms = 0.0;
  long steps = 0;
  long fallbacks = 0;
  long jitter_events = 0;
  long failed_steps = 0;
  std::map<int, long> iteration_histogram;  // fixed-point iterations -> step count
  Vector mean_iterations;                   // per time
  Vector fallbacks_per_t;

  double fraction_within(int iterations) const {
    long ok = 0, total = 0;
    for (auto [k, c] : iteration_histogram) {
      total += c;
      if (k <= iterations) ok += c;
    }
    return total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
  }
};

struct RunReport {
  std::vector<FilterReport> filters;
  std::string scenario;
  std::string network;
  std::uint64_t base_seed = 0;
  int experiments = 0;
  int horizon = 0;
  long floor_events = 0;
  std::string convention = "as_printed";
  std::string config_hash;
  std::string code_version = RDSE_VERSION;

  const FilterReport& at(const std::string& name) const {
    for (const auto& f : filters)
      if (f.name == name) return f;
    throw ValidationError("no filter named '" + name + "' in report");
  }
};

/// One experiment's measurement stream and truth, exactly what every filter sees.
struct ExperimentData {
  Trajectory truth;
  Vector initial_estimate;
};

inline ExperimentData generate_experiment(const ExperimentSpec& spec, const PowerSystemModel& model, int j) {
  const std::uint64_t e = static_cast<std::uint64_t>(j);
  NoiseSource q = process_noise(spec.scenario, spec.base_seed, e);
  NoiseSource r = measurement_noise(spec.scenario, spec.base_seed, e);
  const Vector u0 = initial_state(spec.network);
  const Index n = model.state_dim(), m = model.measurement_dim();
  ExperimentData d;
  d.truth = simulate_truth(model, u0, spec.holt, spec.horizon, [&] { return q(n); }, [&] { return r(m); });
  for (int t = 1; t <= spec.horizon; ++t)
    d.truth.measurements[t - 1] = apply_bad_data(d.truth.measurements[t - 1], t, spec.scenario.bad_data, spec.plan);
  d.initial_estimate = u0;
  if (spec.init.perturb_initial) {
    Rng init = make_stream(spec.base_seed, e, StreamRole::initial);
    std::normal_distribution<double> n01;
    d.initial_estimate += std::sqrt(spec.init.p00) * Vector::NullaryExpr(n, [&] { return n01(init); });
  }
  return d;
}

namespace detail {

struct FilterRun {
  Vector sq_v, sq_phi;
  Vector iterations, fallbacks;
  double step_seconds = 0.0;
  long steps = 0, fallback_count = 0, jitter = 0, failed = 0;
  std::map<int, long> histogram;
};

inline FilterRun run_filter(const ExperimentSpec& spec, const PowerSystemModel& model, const ExperimentData& d,
                            const FilterConfig& cfg) {
  const Index n = model.state_dim(), m = model.measurement_dim(), nb = model.bus_count();
  const int T = spec.horizon;
  FilterRun out;
  out.sq_v = out.sq_phi = out.iterations = out.fallbacks = Vector::Zero(T);
  FilterState s = make_filter_state(d.initial_estimate, spec.init.p00 * Matrix::Identity(n, n),
                                    Vector::Constant(n, spec.init.q0), Vector::Constant(m, spec.init.r0), spec.holt);
  for (int t = 0; t < T; ++t) {
    StepDiagnostics diag;
    const auto start = std::chrono::steady_clock::now();
    try {
      s = step(s, d.truth.measurements[t], model, cfg, &diag);
    } catch (const FilterStepError&) {
      ++out.failed;
      ++s.step;
    }
    out.step_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++out.steps;
    out.jitter += diag.jitter_events;
    if (diag.fallback) {
      ++out.fallback_count;
      out.fallbacks(t) += 1.0;
    }
    if (cfg.robust() && !diag.fallback) ++out.histogram[diag.iterations];
    out.iterations(t) += diag.iterations;
    const Vector e = s.mean - d.truth.states[t];
    const double ev = e.head(nb).squaredNorm(), ep = e.tail(n - nb).squaredNorm();
    out.sq_v(t) = std::isfinite(ev) ? ev : 1e300;
    out.sq_phi(t) = std::isfinite(ep) ? ep : 1e300;
  }
  return out;
}

}  // namespace detail

inline RunReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const PowerSystemModel model(spec.network, spec.plan);
  const int D = spec.experiments, T = spec.horizon;
  const std::size_t F = spec.filters.size();
  std::vector<std::vector<detail::FilterRun>> runs(D);
  std::vector<long> floors(D, 0);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int j = next++; j < D; j = next++) {
      const ExperimentData d = generate_experiment(spec, model, j);
      floors[j] = d.truth.floor_events;
      runs[j].reserve(F);
      for (const auto& f : spec.filters) runs[j].push_back(detail::run_filter(spec, model, d, f.config));
    }
  };
  unsigned jobs = spec.jobs ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(D));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  RunReport rep;
  rep.scenario = spec.scenario.name;
  rep.network = spec.network.title;
  rep.base_seed = spec.base_seed;
  rep.experiments = D;
  rep.horizon = T;
  rep.convention = to_string(spec.convention);
  rep.config_hash = spec.config_hash;
  for (long f : floors) rep.floor_events += f;
  const Index nb = spec.network.bus_count();
  for (std::size_t k = 0; k < F; ++k) {
    FilterReport fr;
    fr.name = spec.filters[k].name;
    fr.mode = to_string(spec.filters[k].config.criterion.mode);
    Vector sv = Vector::Zero(T), sp = Vector::Zero(T);
    fr.mean_iterations = fr.fallbacks_per_t = Vector::Zero(T);
    double seconds = 0.0;
    for (int j = 0; j < D; ++j) {
      const auto& r = runs[j][k];
      sv += r.sq_v;
      sp += r.sq_phi;
      fr.mean_iterations += r.iterations;
      fr.fallbacks_per_t += r.fallbacks;
      seconds += r.step_seconds;
      fr.steps += r.steps;
      fr.fallbacks += r.fallback_count;
      fr.jitter_events += r.jitter;
      fr.failed_steps += r.failed;
      for (auto [it, c] : r.histogram) fr.iteration_histogram[it] += c;
    }
    fr.mean_iterations /= static_cast<double>(D);
    const double ad = static_cast<double>(nb) * D;
    fr.rmse_v = (sv / ad).cwiseSqrt();
    fr.rmse_phi = (sp / ad).cwiseSqrt();
    fr.armse_v = armse_from_sums(sv, nb, D, spec.convention);
    fr.armse_phi = armse_from_sums(sp, nb, D, spec.convention);
    fr.mean_step_ms = fr.steps ? 1e3 * seconds / static_cast<double>(fr.steps) : 0.0;
    rep.filters.push_back(std::move(fr));
  }
  return rep;
}

// Report serialization.

inline constexpr int kReportSchemaVersion = 1;

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_summary_csv(const RunReport& r, std::ostream& out) {
  out << "filter,armse_v,armse_phi,mean_step_ms,fallbacks\n";
  for (const auto& f : r.filters)
    out << f.name << ',' << format_real(f.armse_v) << ',' << format_real(f.armse_phi) << ','
        << format_real(f.mean_step_ms) << ',' << f.fallbacks << '\n';
}

inline void write_series_csv(const RunReport& r, std::ostream& out) {
  out << "filter,metric,t,value\n";
  for (const auto& f : r.filters) {
    for (Index t = 0; t < f.rmse_v.size(); ++t) out << f.name << ",rmse_v," << t + 1 << ',' << format_real(f.rmse_v(t)) << '\n';
    for (Index t = 0; t < f.rmse_phi.size(); ++t)
      out << f.name << ",rmse_phi," << t + 1 << ',' << format_real(f.rmse_phi(t)) << '\n';
  }
}

inline void write_diagnostics_csv(const RunReport& r, std::ostream& out) {
  out << "filter,t,mean_iterations,fallbacks\n";
  for (const auto& f : r.filters)
    for (Index t = 0; t < f.mean_iterations.size(); ++t)
      out << f.name << ',' << t + 1 << ',' << format_real(f.mean_iterations(t)) << ','
          << format_real(f.fallbacks_per_t(t)) << '\n';
}

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

/// Line 1: run metadata; then one summary record and one series record per filter.
inline void write_report_jsonl(const RunReport& r, std::ostream& out) {
  using nlohmann::json;
  json meta{{"record", "run"},          {"schema", "rdse.report"},     {"version", kReportSchemaVersion},
            {"scenario", r.scenario},   {"network", r.network},        {"base_seed", r.base_seed},
            {"experiments", r.experiments}, {"horizon", r.horizon},    {"floor_events", r.floor_events},
            {"convention", r.convention}, {"config_hash", r.config_hash}, {"code_version", r.code_version}};
  out << meta.dump() << '\n';
  for (const auto& f : r.filters) {
    json hist = json::object();
    for (auto [k, c] : f.iteration_histogram) hist[std::to_string(k)] = c;
    json s{{"record", "summary"},     {"filter", f.name},         {"mode", f.mode},
           {"armse_v", f.armse_v},    {"armse_phi", f.armse_phi}, {"mean_step_ms", f.mean_step_ms},
           {"steps", f.steps},        {"fallbacks", f.fallbacks}, {"jitter_events", f.jitter_events},
           {"failed_steps", f.failed_steps}, {"iteration_histogram", hist}};
    out << s.dump() << '\n';
    json series{{"record", "series"},
                {"filter", f.name},
                {"rmse_v", vector_json(f.rmse_v)},
                {"rmse_phi", vector_json(f.rmse_phi)},
                {"mean_iterations", vector_json(f.mean_iterations)},
                {"fallbacks", vector_json(f.fallbacks_per_t)}};
    out << series.dump() << '\n';
  }
}

inline RunReport read_report_jsonl(std::istream& in) {
  using nlohmann::json;
  RunReport r;
  std::string line;
  bool saw_meta = false;
  std::size_t lineno = 0;
  auto find = [&](const std::string& name) -> FilterReport& {
    for (auto& f : r.filters)
      if (f.name == name) return f;
    r.filters.push_back({});
    r.filters.back().name = name;
    return r.filters.back();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), lineno);
    }
    const std::string kind = j.at("record");
    if (kind == "run") {
      if (j.at("schema") != "rdse.report" || j.at("version") != kReportSchemaVersion)
        throw ParseError("unsupported report schema", lineno);
      saw_meta = true;
      r.scenario = j.at("scenario");
      r.network = j.at("network");
      r.base_seed = j.at("base_seed");
      r.experiments = j.at("experiments");
      r.horizon = j.at("horizon");
      r.floor_events = j.at("floor_events");
      r.convention = j.at("convention");
      r.config_hash = j.at("config_hash");
      r.code_version = j.at("code_version");
    } else if (kind == "summary") {
      auto& f = find(j.at("filter"));
      f.mode = j.at("mode");
      f.armse_v = j.at("armse_v");
      f.armse_phi = j.at("armse_phi");
      f.mean_step_ms = j.at("mean_step_ms");
      f.steps = j.at("steps");
      f.fallbacks = j.at("fallbacks");
      f.jitter_events = j.at("jitter_events");
      f.failed_steps = j.at("failed_steps");
      for (auto& [k, c] : j.at("iteration_histogram").items()) f.iteration_histogram[std::stoi(k)] = c.get<long>();
    } else if (kind == "series") {
      auto& f = find(j.at("filter"));
      f.rmse_v = json_vector(j.at("rmse_v"));
      f.rmse_phi = json_vector(j.at("rmse_phi"));
      f.mean_iterations = json_vector(j.at("mean_iterations"));
      f.fallbacks_per_t = json_vector(j.at("fallbacks"));
    } else {
      throw ParseError("unknown record type '" + kind + "'", lineno);
    }
  }
  if (!saw_meta) throw ParseError("report has no run record", 0);
  return r;
}

/// FNV-1a, used to fingerprint canonical config text.
inline std::string fingerprint(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rdse
