#pragma once

// Quasi-steady-state power system model: Holt transition, power-flow measurements, truth trajectories.

#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rdse/casefile.hpp"
#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"

namespace rdse {

// Packed state layout: [|V|_0 .. |V|_{N-1}, phase of every non-slack bus in bus order].

inline Vector pack_state(const Vector& magnitudes, const Vector& phases, Index slack) {
  const Index n_bus = magnitudes.size();
  Vector u(2 * n_bus - 1);
  u.head(n_bus) = magnitudes;
  Index k = n_bus;
  for (Index i = 0; i < n_bus; ++i)
    if (i != slack) u(k++) = phases(i) - phases(slack);
  return u;
}

/// Unpacks into (magnitudes, phases) with the slack phase at exactly 0.
inline std::pair<Vector, Vector> unpack_state(const Vector& u, Index n_bus, Index slack) {
  Vector mag = u.head(n_bus);
  Vector ph = Vector::Zero(n_bus);
  Index k = n_bus;
  for (Index i = 0; i < n_bus; ++i)
    if (i != slack) ph(i) = u(k++);
  return {std::move(mag), std::move(ph)};
}

inline Vector initial_state(const PowerNetwork& net) {
  Vector mag(net.bus_count()), ph(net.bus_count());
  for (Index i = 0; i < net.bus_count(); ++i) {
    mag(i) = net.buses[i].initial_magnitude;
    ph(i) = net.buses[i].initial_phase;
  }
  return pack_state(mag, ph, net.slack_index);
}

// Holt two-parameter exponential smoothing.

struct HoltParams {
  double level = 0.8;  // Upsilon
  double trend = 0.5;  // Gamma

  void validate() const {
    if (!(level > 0.0 && level < 1.0) || !(trend > 0.0 && trend < 1.0))
      throw ValidationError("Holt coefficients must lie strictly inside (0, 1)");
  }
};

struct HoltState {
  Vector prediction;  // last one-step prediction, u~_{t-1}
  Vector level;       // Delta_{t-2}
  Vector trend;       // Theta_{t-2}
  HoltParams coeffs;
};

inline HoltState holt_init(const Vector& u0, HoltParams coeffs = {}) {
  return {u0, u0, Vector::Zero(u0.size()), coeffs};
}

/// f(u) = Delta + Theta with Delta = Y u + (1-Y) u~ and Theta = G (Delta - Delta_prev) + (1-G) Theta_prev.
inline std::pair<Vector, HoltState> holt_predict(const Vector& u_prev, const HoltState& h) {
  if (u_prev.size() != h.prediction.size() || h.level.size() != u_prev.size() || h.trend.size() != u_prev.size())
    throw ValidationError("Holt state dimension mismatch");
  const double y = h.coeffs.level;
  const double g = h.coeffs.trend;
  HoltState next;
  next.coeffs = h.coeffs;
  next.level = y * u_prev + (1.0 - y) * h.prediction;
  next.trend = g * (next.level - h.level) + (1.0 - g) * h.trend;
  next.prediction = next.level + next.trend;
  Vector predicted = next.prediction;
  return {std::move(predicted), std::move(next)};
}

// Measurement plan.

enum class MeasurementKind { voltage_magnitude, real_injection, reactive_injection, real_flow, reactive_flow };

struct MeasurementDescriptor {
  MeasurementKind kind = MeasurementKind::voltage_magnitude;
  Index bus = 0;          // bus position, for magnitudes and injections
  Index branch = 0;       // branch position, for flows
  bool from_end = true;   // flows: metered at the branch's from bus

  bool is_power() const { return kind != MeasurementKind::voltage_magnitude; }
};

struct MeasurementPlan {
  std::vector<MeasurementDescriptor> items;
  Index size() const { return static_cast<Index>(items.size()); }
};

inline std::string describe(const MeasurementDescriptor& d, const PowerNetwork& net) {
  auto flow = [&](const char* tag) {
    const auto& br = net.branches[d.branch];
    const int a = d.from_end ? br.from_bus : br.to_bus;
    const int b = d.from_end ? br.to_bus : br.from_bus;
    std::string s = std::string(tag) + " " + std::to_string(a) + "-" + std::to_string(b);
    int ordinal = 0;
    for (Index k = 0; k <= d.branch; ++k) {
      const auto& o = net.branches[k];
      if ((o.from_bus == br.from_bus && o.to_bus == br.to_bus) || (o.from_bus == br.to_bus && o.to_bus == br.from_bus))
        ++ordinal;
    }
    if (ordinal > 1) s += "#" + std::to_string(ordinal);
    return s;
  };
  switch (d.kind) {
    case MeasurementKind::voltage_magnitude: return "Vmag " + std::to_string(net.buses[d.bus].id);
    case MeasurementKind::real_injection: return "Pinj " + std::to_string(net.buses[d.bus].id);
    case MeasurementKind::reactive_injection: return "Qinj " + std::to_string(net.buses[d.bus].id);
    case MeasurementKind::real_flow: return flow("Pflow");
    case MeasurementKind::reactive_flow: return flow("Qflow");
  }
  return {};
}

inline void validate_plan(const MeasurementPlan& plan, const PowerNetwork& net) {
  for (const auto& d : plan.items) {
    if (d.is_power() && (d.kind == MeasurementKind::real_flow || d.kind == MeasurementKind::reactive_flow)) {
      if (d.branch < 0 || d.branch >= net.branch_count()) throw ValidationError("measurement references unknown branch");
    } else if (d.bus < 0 || d.bus >= net.bus_count()) {
      throw ValidationError("measurement references unknown bus");
    }
  }
  if (plan.size() <= net.state_dim())
    throw ValidationError("measurement plan has " + std::to_string(plan.size()) + " entries; at least " +
                          std::to_string(net.state_dim() + 1) + " are needed for observability");
}

/// Parses descriptors such as "Vmag 3", "Pinj 3", "Qflow 4-5" or "Pflow 4-18#2" (second parallel circuit).
inline MeasurementDescriptor parse_descriptor(const std::string& text, const PowerNetwork& net) {
  std::istringstream in(text);
  std::string tag, where;
  if (!(in >> tag >> where) || !(in >> std::ws).eof()) throw ValidationError("bad measurement descriptor '" + text + "'");
  MeasurementDescriptor d;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ValidationError("bad measurement descriptor '" + text + "'");
    return v;
  };
  if (tag == "Vmag" || tag == "Pinj" || tag == "Qinj") {
    d.kind = tag == "Vmag"   ? MeasurementKind::voltage_magnitude
             : tag == "Pinj" ? MeasurementKind::real_injection
                             : MeasurementKind::reactive_injection;
    d.bus = net.bus_index(to_int(where));
    return d;
  }
  if (tag != "Pflow" && tag != "Qflow") throw ValidationError("unknown measurement kind '" + tag + "'");
  d.kind = tag == "Pflow" ? MeasurementKind::real_flow : MeasurementKind::reactive_flow;
  int ordinal = 1;
  if (auto hash = where.find('#'); hash != std::string::npos) {
    ordinal = to_int(where.substr(hash + 1));
    where = where.substr(0, hash);
  }
  const auto dash = where.find('-');
  if (dash == std::string::npos || dash == 0) throw ValidationError("bad measurement descriptor '" + text + "'");
  const int a = to_int(where.substr(0, dash));
  const int b = to_int(where.substr(dash + 1));
  int seen = 0;
  for (Index k = 0; k < net.branch_count(); ++k) {
    const auto& br = net.branches[k];
    const bool fwd = br.from_bus == a && br.to_bus == b;
    const bool rev = br.from_bus == b && br.to_bus == a;
    if ((fwd || rev) && ++seen == ordinal) {
      d.branch = k;
      d.from_end = fwd;
      return d;
    }
  }
  throw ValidationError("no branch " + where + " for descriptor '" + text + "'");
}

inline MeasurementPlan make_plan(const PowerNetwork& net, std::span<const std::string> descriptors) {
  MeasurementPlan plan;
  for (const auto& s : descriptors) plan.items.push_back(parse_descriptor(s, net));
  validate_plan(plan, net);
  return plan;
}

/// Every bus magnitude, every bus P/Q injection, then every branch P/Q flow at its from end.
inline MeasurementPlan default_plan(const PowerNetwork& net) {
  MeasurementPlan plan;
  for (Index i = 0; i < net.bus_count(); ++i) plan.items.push_back({MeasurementKind::voltage_magnitude, i, 0, true});
  for (Index i = 0; i < net.bus_count(); ++i) plan.items.push_back({MeasurementKind::real_injection, i, 0, true});
  for (Index i = 0; i < net.bus_count(); ++i) plan.items.push_back({MeasurementKind::reactive_injection, i, 0, true});
  for (Index k = 0; k < net.branch_count(); ++k) plan.items.push_back({MeasurementKind::real_flow, 0, k, true});
  for (Index k = 0; k < net.branch_count(); ++k) plan.items.push_back({MeasurementKind::reactive_flow, 0, k, true});
  validate_plan(plan, net);
  return plan;
}

/// Measurement function g(u) over a fixed network and plan, with sparse admittance access.
class PowerFlowMeasurement {
 public:
  PowerFlowMeasurement(const PowerNetwork& net, MeasurementPlan plan)
      : n_bus_(net.bus_count()), slack_(net.slack_index), plan_(std::move(plan)) {
    validate_plan(plan_, net);
    neighbors_.resize(n_bus_);
    for (Index i = 0; i < n_bus_; ++i)
      for (Index j = 0; j < n_bus_; ++j)
        if (net.G(i, j) != 0.0 || net.B(i, j) != 0.0) neighbors_[i].push_back({j, net.G(i, j), net.B(i, j)});
    for (const auto& br : net.branches) {
      ports_.push_back({net.bus_index(br.from_bus), net.bus_index(br.to_bus), branch_admittance(br)});
    }
  }

  Index state_dim() const { return 2 * n_bus_ - 1; }
  Index size() const { return plan_.size(); }
  const MeasurementPlan& plan() const { return plan_; }

  Vector operator()(const Vector& u) const {
    auto [vm, va] = unpack_state(u, n_bus_, slack_);
    Vector z(plan_.size());
    for (Index k = 0; k < plan_.size(); ++k) {
      const auto& d = plan_.items[k];
      switch (d.kind) {
        case MeasurementKind::voltage_magnitude: z(k) = vm(d.bus); break;
        case MeasurementKind::real_injection:
        case MeasurementKind::reactive_injection: {
          const Index i = d.bus;
          double p = 0.0, q = 0.0;
          for (const auto& e : neighbors_[i]) {
            const double th = va(i) - va(e.j);
            const double c = std::cos(th), s = std::sin(th);
            p += vm(e.j) * (e.g * c + e.b * s);
            q += vm(e.j) * (e.g * s - e.b * c);
          }
          z(k) = vm(i) * (d.kind == MeasurementKind::real_injection ? p : q);
          break;
        }
        case MeasurementKind::real_flow:
        case MeasurementKind::reactive_flow: {
          const auto& pt = ports_[d.branch];
          const Index i = d.from_end ? pt.from : pt.to;
          const Index j = d.from_end ? pt.to : pt.from;
          const double gii = d.from_end ? pt.y.gff : pt.y.gtt;
          const double bii = d.from_end ? pt.y.bff : pt.y.btt;
          const double gij = d.from_end ? pt.y.gft : pt.y.gtf;
          const double bij = d.from_end ? pt.y.bft : pt.y.btf;
          const double th = va(i) - va(j);
          const double c = std::cos(th), s = std::sin(th);
          const double vv = vm(i) * vm(j);
          z(k) = d.kind == MeasurementKind::real_flow ? vm(i) * vm(i) * gii + vv * (gij * c + bij * s)
                                                      : -vm(i) * vm(i) * bii + vv * (gij * s - bij * c);
          break;
        }
      }
    }
    return z;
  }

 private:
  struct Entry {
    Index j;
    double g, b;
  };
  struct Port {
    Index from, to;
    BranchAdmittance y;
  };
  Index n_bus_;
  Index slack_;
  MeasurementPlan plan_;
  std::vector<std::vector<Entry>> neighbors_;
  std::vector<Port> ports_;
};

inline Vector measure(const PowerNetwork& net, const Vector& u, const MeasurementPlan& plan) {
  return PowerFlowMeasurement(net, plan)(u);
}

/// Holt transition plus power-flow measurements; the model type driven by the filter engine.
class PowerSystemModel {
 public:
  PowerSystemModel(const PowerNetwork& net, MeasurementPlan plan)
      : n_bus_(net.bus_count()), g_(net, std::move(plan)) {}

  Index state_dim() const { return g_.state_dim(); }
  Index measurement_dim() const { return g_.size(); }
  Index bus_count() const { return n_bus_; }
  const MeasurementPlan& plan() const { return g_.plan(); }

  Vector transition(const Vector& u, const HoltState& h) const { return holt_predict(u, h).first; }
  HoltState advance(const Vector& u, const HoltState& h) const { return holt_predict(u, h).second; }
  Vector measure(const Vector& u) const { return g_(u); }

 private:
  Index n_bus_;
  PowerFlowMeasurement g_;
};

struct Trajectory {
  std::vector<Vector> states;        // u_1 .. u_T
  std::vector<Vector> measurements;  // v_1 .. v_T
  long floor_events = 0;             // magnitudes clipped up to the floor
};

inline constexpr double kMagnitudeFloor = 1e-4;

/// u_t = f(u_{t-1}) + q_t, v_t = g(u_t) + r_t. `qgen()` / `rgen()` return one noise draw each;
/// seeding is the caller's business so that both generators own independent streams.
template <class ProcessNoise, class MeasurementNoise>
Trajectory simulate_truth(const PowerSystemModel& model, const Vector& u0, const HoltParams& holt, int steps,
                          ProcessNoise&& qgen, MeasurementNoise&& rgen, double magnitude_floor = kMagnitudeFloor) {
  if (steps < 1) throw ValidationError("trajectory needs at least one step");
  Trajectory out;
  out.states.reserve(steps);
  out.measurements.reserve(steps);
  HoltState h = holt_init(u0, holt);
  Vector u = u0;
  const Index n_bus = model.bus_count();
  for (int t = 1; t <= steps; ++t) {
    auto [pred, next] = holt_predict(u, h);
    h = std::move(next);
    u = pred + qgen();
    for (Index i = 0; i < n_bus; ++i) {
      if (u(i) < magnitude_floor) {
        u(i) = magnitude_floor;
        ++out.floor_events;
      }
    }
    out.states.push_back(u);
    out.measurements.push_back(model.measure(u) + rgen());
  }
  return out;
}

}  // namespace rdse
