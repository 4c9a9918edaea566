#pragma once

// Noise and fault generators for the simulated estimation scenarios.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"
#include "rdse/psmodel.hpp"
#include "rdse/rng.hpp"

namespace rdse {

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double variance = 1.0;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components{{1.0, 0.0, 1.0}};

  static MixtureSpec gaussian(double variance, double mean = 0.0) { return {{{1.0, mean, variance}}}; }

  void validate() const {
    if (components.empty()) throw ValidationError("mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0 && c.weight <= 1.0)) throw ValidationError("mixture weight outside [0, 1]");
      if (!(c.variance >= 0.0)) throw ValidationError("mixture variance must be nonnegative");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("mixture weights must sum to 1");
  }

  double mean() const {
    double m = 0.0;
    for (const auto& c : components) m += c.weight * c.mean;
    return m;
  }
  double variance() const {
    const double m = mean();
    double v = 0.0;
    for (const auto& c : components) v += c.weight * (c.variance + (c.mean - m) * (c.mean - m));
    return v;
  }
};

/// Base draw plus impulses. Each step a uniformly chosen `component_fraction` of the entries is
/// eligible, and each eligible entry independently receives, with probability `impulse_prob`, an
/// extra N(0, (impulse_scale * base std)^2) draw.
struct ImpulseSpec {
  MixtureSpec base;
  double impulse_prob = 0.0;
  double impulse_scale = 10.0;
  double component_fraction = 0.1;

  void validate() const {
    base.validate();
    if (!(impulse_prob >= 0.0 && impulse_prob <= 1.0)) throw ValidationError("impulse probability outside [0, 1]");
    if (!(impulse_scale > 0.0)) throw ValidationError("impulse scale must be positive");
    if (!(component_fraction > 0.0 && component_fraction <= 1.0))
      throw ValidationError("impulse component fraction outside (0, 1]");
  }
};

inline Vector sample_mixture(const MixtureSpec& spec, Rng& rng, Index d) {
  Vector out(d);
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  std::normal_distribution<double> n01;
  const auto& cs = spec.components;
  for (Index i = 0; i < d; ++i) {
    std::size_t k = 0;
    if (cs.size() > 1) {
      const double r = pick(rng);
      double acc = 0.0;
      for (k = 0; k + 1 < cs.size(); ++k) {
        acc += cs[k].weight;
        if (r < acc) break;
      }
    }
    out(i) = cs[k].mean + std::sqrt(cs[k].variance) * n01(rng);
  }
  return out;
}

/// `base_rng` drives the base draw, `impulse_rng` the index, event and magnitude draws.
inline Vector sample_impulse(const ImpulseSpec& spec, Rng& base_rng, Rng& impulse_rng, Index d) {
  Vector out = sample_mixture(spec.base, base_rng, d);
  if (spec.impulse_prob <= 0.0 || d == 0) return out;
  const Index eligible = std::clamp<Index>(static_cast<Index>(std::lround(spec.component_fraction * d)), 1, d);
  std::vector<Index> idx(d);
  std::iota(idx.begin(), idx.end(), Index{0});
  // Partial Fisher-Yates: the first `eligible` entries are a uniform sample without replacement.
  if (eligible < d) {
    for (Index k = 0; k < eligible; ++k) {
      std::uniform_int_distribution<Index> j(k, d - 1);
      std::swap(idx[k], idx[j(impulse_rng)]);
    }
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;
  const double std_dev = spec.impulse_scale * std::sqrt(spec.base.variance());
  for (Index k = 0; k < eligible; ++k) {
    const bool hit = u01(impulse_rng) < spec.impulse_prob;
    const double z = n01(impulse_rng);
    if (hit) out(idx[k]) += std_dev * z;
  }
  return out;
}

struct BadDataEvent {
  int time = 0;  // 1-based step index
  double multiplier = 1.0;
};

/// Scheduled scaling of every power entry (injections and flows) of the measurement vector.
struct BadDataSchedule {
  std::vector<BadDataEvent> events;

  static BadDataSchedule scenario4() { return {{{20, 1.15}, {40, 0.85}}}; }

  void validate(int horizon) const {
    for (const auto& e : events)
      if (e.time < 1 || e.time > horizon)
        throw ValidationError("bad-data event at t=" + std::to_string(e.time) + " outside horizon 1.." +
                              std::to_string(horizon));
  }
};

inline Vector apply_bad_data(Vector v, int t, const BadDataSchedule& schedule, const MeasurementPlan& plan) {
  if (v.size() != plan.size()) throw ValidationError("measurement vector does not match plan");
  for (const auto& e : schedule.events) {
    if (e.time != t) continue;
    for (Index k = 0; k < plan.size(); ++k)
      if (plan.items[k].is_power()) v(k) *= e.multiplier;
  }
  return v;
}

struct Scenario {
  std::string name = "scenario1";
  ImpulseSpec process{MixtureSpec::gaussian(1e-5), 0.05, 10.0, 0.1};
  ImpulseSpec measurement{MixtureSpec::gaussian(1e-2), 0.05, 10.0, 0.1};
  BadDataSchedule bad_data;

  void validate(int horizon) const {
    process.validate();
    measurement.validate();
    bad_data.validate(horizon);
  }
};

inline Scenario scenario_preset(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "scenario1") return s;
  if (name == "scenario2") {
    s.process = {{{{0.4, 0.2, 1e-4}, {0.2, 0.0, 1e-2}, {0.4, -0.2, 1e-4}}}, 0.0, 10.0, 0.1};
    s.measurement = {{{{0.4, 0.2, 0.3}, {0.2, 0.0, 20.0}, {0.4, -0.2, 0.3}}}, 0.0, 10.0, 0.1};
    return s;
  }
  if (name == "scenario3") {
    s.process = {{{{0.4, 0.3, 1e-3}, {0.2, 0.0, 1e-2}, {0.4, -0.1, 1e-4}}}, 0.0, 10.0, 0.1};
    s.measurement = {{{{0.4, 0.3, 0.2}, {0.2, 0.0, 20.0}, {0.4, -0.1, 0.3}}}, 0.0, 10.0, 0.1};
    return s;
  }
  if (name == "scenario4") {
    s.bad_data = BadDataSchedule::scenario4();
    return s;
  }
  if (name == "noise_free") {
    s.process = {MixtureSpec::gaussian(0.0), 0.0, 10.0, 0.1};
    s.measurement = {MixtureSpec::gaussian(0.0), 0.0, 10.0, 0.1};
    return s;
  }
  throw ValidationError("unknown scenario preset '" + name + "'");
}

/// One noise stream pair (base + impulse) per physical role.
class NoiseSource {
 public:
  NoiseSource(ImpulseSpec spec, Rng base, Rng impulse) : spec_(std::move(spec)), base_(base), impulse_(impulse) {}
  Vector operator()(Index d) { return sample_impulse(spec_, base_, impulse_, d); }

 private:
  ImpulseSpec spec_;
  Rng base_;
  Rng impulse_;
};

inline NoiseSource process_noise(const Scenario& s, std::uint64_t seed, std::uint64_t experiment) {
  return {s.process, make_stream(seed, experiment, StreamRole::process),
          make_stream(seed, experiment, StreamRole::impulse)};
}

inline NoiseSource measurement_noise(const Scenario& s, std::uint64_t seed, std::uint64_t experiment) {
  return {s.measurement, make_stream(seed, experiment, StreamRole::measurement),
          make_stream(seed, experiment, StreamRole::measurement_impulse)};
}

}  // namespace rdse
