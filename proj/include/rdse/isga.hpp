#pragma once

// Snow geese search (SGA), its bat-exploitation variant (ISGA), and BAT / PSO baselines.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "rdse/benchmarks.hpp"
#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"
#include "rdse/rng.hpp"

namespace rdse {

enum class OptimizerVariant { sga, isga, bat, pso };
enum class SgaDamping { as_printed, exp_ratio };

inline const char* to_string(OptimizerVariant v) {
  switch (v) {
    case OptimizerVariant::sga: return "SGA";
    case OptimizerVariant::isga: return "ISGA";
    case OptimizerVariant::bat: return "BAT";
    case OptimizerVariant::pso: return "PSO";
  }
  return "ISGA";
}

inline OptimizerVariant optimizer_variant_from_string(const std::string& s) {
  for (auto v : {OptimizerVariant::sga, OptimizerVariant::isga, OptimizerVariant::bat, OptimizerVariant::pso})
    if (s == to_string(v)) return v;
  throw ValidationError("unknown optimizer variant '" + s + "'");
}

inline const char* to_string(SgaDamping d) { return d == SgaDamping::as_printed ? "as_printed" : "exp_ratio"; }

struct OptimizerConfig {
  int population = 30;
  int max_iters = 500;
  Vector lo, hi;
  OptimizerVariant variant = OptimizerVariant::isga;
  double f_min = 10.0;
  double f_max = 100.0;
  std::uint64_t seed = 1;
  SgaDamping damping = SgaDamping::as_printed;
  std::vector<Vector> initial;  // optional warm-start positions for the first agents
  unsigned jobs = 1;            // parallel fitness evaluations per generation

  Index dim() const { return lo.size(); }

  void validate() const {
    if (population < 5) throw ValidationError("population must be at least 5");
    if (max_iters < 1) throw ValidationError("max_iters must be at least 1");
    if (lo.size() == 0 || lo.size() != hi.size()) throw ValidationError("bounds must be non-empty and equal length");
    if ((lo.array() > hi.array()).any()) throw ValidationError("lower bound above upper bound");
    if (!(f_min <= f_max)) throw ValidationError("f_min must not exceed f_max");
    for (const auto& x : initial)
      if (x.size() != lo.size()) throw ValidationError("warm-start position has wrong dimension");
  }

  static OptimizerConfig for_box(const Vector& lo, const Vector& hi, OptimizerVariant v = OptimizerVariant::isga) {
    OptimizerConfig c;
    c.lo = lo;
    c.hi = hi;
    c.variant = v;
    return c;
  }
};

struct Agent {
  Vector x;
  Vector v;
  double fitness = std::numeric_limits<double>::infinity();
};

struct OptimizerResult {
  Vector best;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<double> curve;  // incumbent after each iteration
  long evaluations = 0;
};

inline double omega_phase(int t, int max_iters) {
  if (t < 0 || t > max_iters) throw ValidationError("iteration outside 0..M");
  return 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(max_iters);
}

inline Vector clamp_to(const Vector& x, const Vector& lo, const Vector& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

/// sum_i x_i f(x_i) / sum_i f(x_i); plain mean when the weights are unusable (zero sum, mixed sign, non-finite).
inline Vector fitness_centroid(const std::vector<Agent>& agents) {
  const Index d = agents.front().x.size();
  double wsum = 0.0;
  bool pos = false, neg = false, finite = true;
  for (const auto& a : agents) {
    wsum += a.fitness;
    pos |= a.fitness > 0.0;
    neg |= a.fitness < 0.0;
    finite &= std::isfinite(a.fitness);
  }
  Vector c = Vector::Zero(d);
  if (!finite || (pos && neg) || wsum == 0.0 || !std::isfinite(wsum)) {
    for (const auto& a : agents) c += a.x;
    return c / static_cast<double>(agents.size());
  }
  for (const auto& a : agents) c += a.fitness * a.x;
  return c / wsum;
}

inline double sga_damping(int t, int max_iters, SgaDamping mode) {
  const double m = static_cast<double>(max_iters);
  const double growth = mode == SgaDamping::as_printed ? std::exp(m) : std::exp(static_cast<double>(t) / m);
  return 4.0 * static_cast<double>(t) / (m * growth);
}

enum class Cohort { leading, middle, trailing };

inline Cohort cohort_of(Index rank, Index n) {
  if (rank < n / 5) return Cohort::leading;
  if (rank < 4 * n / 5) return Cohort::middle;
  return Cohort::trailing;
}

struct ExploreDraws {
  double b = 0.0;    // 4 rand - 2
  double d = 0.0;    // 3 rand - 1.5
  double eta = 0.0;  // 2 rand - 1
};

/// Herringbone update of one agent; `tail` is the last-ranked agent's position.
inline void explore_update(Agent& a, Cohort c, const Vector& best, const Vector& centroid, const Vector& tail,
                           const ExploreDraws& r, double damping, double omega) {
  const Vector vnext = (damping * a.v + best - a.x).array() - 1.29 * a.v.array().square() * 1e-2 * std::sin(omega) / 2.0;
  Vector x = a.x + r.b * (best - a.x);
  if (c == Cohort::middle) x -= r.d * (centroid - a.x);
  if (c == Cohort::trailing) x += r.d * (centroid - a.x) - r.eta * (tail + a.x);
  a.x = x + vnext;
  a.v = vnext;
}

/// Straight-line update; `normals` empty selects the r > 0.5 branch.
inline void sga_exploit_update(Agent& a, const Vector& best, double r, const Vector& normals) {
  const Vector diff = a.x - best;
  if (r > 0.5 || normals.size() == 0)
    a.x += diff * r;
  else
    a.x += (diff * r).cwiseProduct(normals);
}

inline void bat_update(Agent& a, const Vector& best, double frequency) {
  a.v += (a.x - best) * frequency;
  a.x += a.v;
}

namespace detail {

inline void clamp_agent(Agent& a, const OptimizerConfig& cfg) {
  const Vector span = cfg.hi - cfg.lo;
  for (Index i = 0; i < a.v.size(); ++i)
    if (!std::isfinite(a.v(i))) a.v(i) = 0.0;
  a.v = a.v.cwiseMax(-span).cwiseMin(span);
  for (Index i = 0; i < a.x.size(); ++i)
    if (!std::isfinite(a.x(i))) a.x(i) = 0.5 * (cfg.lo(i) + cfg.hi(i));
  a.x = clamp_to(a.x, cfg.lo, cfg.hi);
}

template <class F>
double safe_eval(F& f, const Vector& x, double previous) {
  try {
    const double v = f(x);
    return std::isnan(v) ? previous : v;
  } catch (const std::exception&) {
    return previous;
  }
}

// Evaluates fitness of every agent; a failed evaluation keeps the previous fitness (+inf initially).
template <class F>
void evaluate_all(std::vector<Agent>& agents, F& f, unsigned jobs, long& count) {
  const std::size_t n = agents.size();
  count += static_cast<long>(n);
  if (jobs <= 1) {
    for (auto& a : agents) a.fitness = safe_eval(f, a.x, a.fitness);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) agents[i].fitness = safe_eval(f, agents[i].x, agents[i].fitness);
  };
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < std::min<unsigned>(jobs, static_cast<unsigned>(n)); ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

inline Vector uniform_in(const OptimizerConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Vector x(cfg.dim());
  for (Index i = 0; i < x.size(); ++i) x(i) = cfg.lo(i) + (cfg.hi(i) - cfg.lo(i)) * u01(rng);
  return x;
}

}  // namespace detail

/// Minimizes `f` over the box. Deterministic per seed; the incumbent is greedily tracked.
template <class F>
OptimizerResult optimize(F&& f, const OptimizerConfig& cfg) {
  cfg.validate();
  const Index d = cfg.dim();
  const int n = cfg.population, M = cfg.max_iters;
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;

  std::vector<Agent> agents(n);
  for (int i = 0; i < n; ++i) {
    agents[i].x = detail::uniform_in(cfg, rng);
    if (i < static_cast<int>(cfg.initial.size())) agents[i].x = clamp_to(cfg.initial[i], cfg.lo, cfg.hi);
    agents[i].v = Vector::Zero(d);
  }
  OptimizerResult res;
  detail::evaluate_all(agents, f, cfg.jobs, res.evaluations);
  auto track = [&](const std::vector<Agent>& pool) {
    for (const auto& a : pool)
      if (a.fitness < res.best_fitness) {
        res.best_fitness = a.fitness;
        res.best = a.x;
      }
  };
  track(agents);
  if (res.best.size() == 0) res.best = agents.front().x;

  // PSO personal bests, BAT loudness and pulse rate.
  std::vector<Agent> personal = agents;
  const double pso_w = 0.7298, pso_c = 1.49618;
  std::vector<double> loudness(n, 0.5);
  std::vector<double> pulse(n, 0.5);

  for (int t = 0; t < M; ++t) {
    const double omega = omega_phase(t, M);
    switch (cfg.variant) {
      case OptimizerVariant::sga:
      case OptimizerVariant::isga: {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return agents[a].fitness < agents[b].fitness; });
        if (omega < std::numbers::pi) {
          const Vector centroid = fitness_centroid(agents);
          const Vector tail = agents[order.back()].x;
          const double damping = sga_damping(t, M, cfg.damping);
          for (int rank = 0; rank < n; ++rank) {
            ExploreDraws r{4.0 * u01(rng) - 2.0, 3.0 * u01(rng) - 1.5, 2.0 * u01(rng) - 1.0};
            auto& a = agents[order[rank]];
            explore_update(a, cohort_of(rank, n), res.best, centroid, tail, r, damping, omega);
          }
        } else if (cfg.variant == OptimizerVariant::sga) {
          for (auto& a : agents) {
            const double r = u01(rng);
            Vector normals;
            if (r <= 0.5) normals = Vector::NullaryExpr(d, [&] { return n01(rng); });
            sga_exploit_update(a, res.best, r, normals);
          }
        } else {
          for (auto& a : agents) bat_update(a, res.best, cfg.f_min + (cfg.f_max - cfg.f_min) * u01(rng));
        }
        for (auto& a : agents) detail::clamp_agent(a, cfg);
        detail::evaluate_all(agents, f, cfg.jobs, res.evaluations);
        break;
      }
      case OptimizerVariant::bat: {
        std::vector<Agent> trial = agents;
        const double avg_loud = std::accumulate(loudness.begin(), loudness.end(), 0.0) / n;
        for (int i = 0; i < n; ++i) {
          bat_update(trial[i], res.best, cfg.f_min + (cfg.f_max - cfg.f_min) * u01(rng));
          if (u01(rng) > pulse[i])
            trial[i].x = res.best + 0.01 * avg_loud * (cfg.hi - cfg.lo).cwiseProduct(
                                                       Vector::NullaryExpr(d, [&] { return n01(rng); }));
          detail::clamp_agent(trial[i], cfg);
        }
        detail::evaluate_all(trial, f, cfg.jobs, res.evaluations);
        for (int i = 0; i < n; ++i) {
          agents[i].v = trial[i].v;
          if (trial[i].fitness <= agents[i].fitness && u01(rng) < loudness[i]) {
            agents[i].x = trial[i].x;
            agents[i].fitness = trial[i].fitness;
            loudness[i] *= 0.9;
            pulse[i] = 0.5 * (1.0 - std::exp(-0.9 * (t + 1)));
          }
        }
        track(trial);
        break;
      }
      case OptimizerVariant::pso: {
        const Vector vmax = 0.2 * (cfg.hi - cfg.lo);
        for (int i = 0; i < n; ++i) {
          auto& a = agents[i];
          const Vector r1 = Vector::NullaryExpr(d, [&] { return u01(rng); });
          const Vector r2 = Vector::NullaryExpr(d, [&] { return u01(rng); });
          a.v = pso_w * a.v + pso_c * r1.cwiseProduct(personal[i].x - a.x) + pso_c * r2.cwiseProduct(res.best - a.x);
          a.v = a.v.cwiseMax(-vmax).cwiseMin(vmax);
          a.x = clamp_to(a.x + a.v, cfg.lo, cfg.hi);
        }
        detail::evaluate_all(agents, f, cfg.jobs, res.evaluations);
        for (int i = 0; i < n; ++i)
          if (agents[i].fitness < personal[i].fitness) personal[i] = agents[i];
        break;
      }
    }
    track(agents);
    res.curve.push_back(res.best_fitness);
  }
  return res;
}

inline OptimizerResult optimize_benchmark(const Benchmark& b, OptimizerConfig cfg) {
  cfg.lo = b.lower();
  cfg.hi = b.upper();
  return optimize(b.f, cfg);
}

}  // namespace rdse
