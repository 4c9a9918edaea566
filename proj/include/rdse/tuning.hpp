#pragma once

// Offline coefficient calibration: a metaheuristic over the 9 free filter coefficients with
// ARMSE(V) + ARMSE(phi) of full Monte Carlo runs as the objective.

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "rdse/filters.hpp"
#include "rdse/harness.hpp"
#include "rdse/isga.hpp"

namespace rdse {

inline constexpr std::array<const char*, 9> kTuningKeys{"ut_alpha",   "ut_beta",    "shape1",
                                                       "shape2",     "shape3",     "bandwidth1",
                                                       "bandwidth2", "bandwidth3", "theta"};

struct TuningBounds {
  Vector lo{{1e-4, 0.0, 1.5, 1.5, 1.5, 0.5, 0.5, 0.5, 0.05}};
  Vector hi{{1.0, 3.0, 4.0, 4.0, 4.0, 20.0, 20.0, 20.0, 0.95}};

  void validate() const {
    if (lo.size() != 9 || hi.size() != 9) throw ValidationError("tuning bounds need 9 entries");
    if ((lo.array() > hi.array()).any()) throw ValidationError("tuning lower bound above upper bound");
    if (!(lo(0) > 0.0)) throw ValidationError("ut_alpha lower bound must be positive");
    if (!(lo(2) > 0.0 && lo(3) > 0.0 && lo(4) > 0.0 && lo(5) > 0.0 && lo(6) > 0.0 && lo(7) > 0.0))
      throw ValidationError("kernel shape and bandwidth bounds must be positive");
    if (!(lo(8) > 0.0 && hi(8) < 1.0)) throw ValidationError("theta bounds must lie inside (0, 1)");
  }
};

/// The last entry is theta in constant mode and the forgetting factor s in forgetting mode.
inline Vector tuning_vector(const FilterConfig& c) {
  const auto& k = c.criterion;
  return Vector{{c.ut.alpha, c.ut.beta, k.fiducial1.shape, k.fiducial2.shape, k.entropy.shape, k.fiducial1.bandwidth,
                 k.fiducial2.bandwidth, k.entropy.bandwidth,
                 c.theta_mode == ThetaMode::constant ? c.theta : c.forgetting}};
}

inline FilterConfig apply_tuning(FilterConfig c, const Vector& x) {
  if (x.size() != 9) throw ValidationError("tuning vector needs 9 entries");
  c.ut.alpha = x(0);
  c.ut.beta = x(1);
  c.criterion.fiducial1 = {x(2), x(5)};
  c.criterion.fiducial2 = {x(3), x(6)};
  c.criterion.entropy = {x(4), x(7)};
  (c.theta_mode == ThetaMode::constant ? c.theta : c.forgetting) = x(8);
  return c;
}

struct TuningBudget {
  int experiments = 10;  // D_fit
  int horizon = 60;      // T_fit
  std::uint64_t seed = 1;
};

struct TuningResult {
  Vector best;
  double fitness = std::numeric_limits<double>::infinity();
  double start_fitness = std::numeric_limits<double>::infinity();  // objective at the base configuration
  FilterConfig config;
  std::vector<double> curve;
  long evaluations = 0;
};

/// ARMSE(V) + ARMSE(phi) of one filter over the budget's experiments; +inf for unusable runs.
inline double tuning_objective(const ExperimentSpec& base, const FilterConfig& cfg, const TuningBudget& b) {
  ExperimentSpec s = base;
  s.filters = {{"candidate", cfg}};
  s.experiments = b.experiments;
  s.horizon = b.horizon;
  s.base_seed = b.seed;
  s.jobs = 1;
  s.scenario.bad_data.events.erase(
      std::remove_if(s.scenario.bad_data.events.begin(), s.scenario.bad_data.events.end(),
                     [&](const BadDataEvent& e) { return e.time > b.horizon; }),
      s.scenario.bad_data.events.end());
  const RunReport r = run_experiment(s);
  const double v = r.filters.front().armse_v + r.filters.front().armse_phi;
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

/// The base configuration's own vector (clamped into the box) is the first agent, so the
/// search can only match or improve it on the training objective.
inline TuningResult tune_filter(const ExperimentSpec& base, const FilterConfig& base_cfg, OptimizerConfig opt,
                                const TuningBudget& budget, const TuningBounds& bounds = {}) {
  bounds.validate();
  base_cfg.validate();
  if (budget.experiments < 1 || budget.horizon < 1) throw ValidationError("tuning budget must be positive");
  opt.lo = bounds.lo;
  opt.hi = bounds.hi;
  const Vector start = clamp_to(tuning_vector(base_cfg), bounds.lo, bounds.hi);
  opt.initial.insert(opt.initial.begin(), start);
  auto objective = [&](const Vector& x) {
    const FilterConfig c = apply_tuning(base_cfg, x);
    c.validate();
    return tuning_objective(base, c, budget);
  };
  const OptimizerResult r = optimize(objective, opt);
  TuningResult out;
  out.best = r.best;
  out.fitness = r.best_fitness;
  out.config = apply_tuning(base_cfg, r.best);
  out.curve = r.curve;
  out.evaluations = r.evaluations;
  out.start_fitness = objective(start);
  return out;
}

}  // namespace rdse
