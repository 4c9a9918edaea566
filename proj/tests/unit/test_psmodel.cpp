#include <gtest/gtest.h>

#include <complex>
#include <random>

#include "cdf_builder.hpp"
#include "rdse/psmodel.hpp"

using namespace rdse;

namespace {

PowerNetwork ieee(const char* name) { return load_cdf(std::string(RDSE_DATA_DIR) + "/" + name); }

PowerNetwork zero_shunt_network() {
  using cdf_builder::Branch;
  auto text = cdf_builder::file({{1, 3}, {2, 0}, {3, 0}, {4, 0}},
                                {{1, 2, 0.01, 0.1}, {2, 3, 0.02, 0.2}, {3, 4, 0.01, 0.15}, {4, 1, 0.03, 0.12}});
  return parse_cdf(text);
}

// Complex-arithmetic oracle: S_i = V_i conj(sum_j Y_ij V_j); flows from the branch two-port.
Vector oracle_measure(const PowerNetwork& net, const Vector& u, const MeasurementPlan& plan) {
  using C = std::complex<double>;
  auto [vm, va] = unpack_state(u, net.bus_count(), net.slack_index);
  std::vector<C> V(net.bus_count());
  for (Index i = 0; i < net.bus_count(); ++i) V[i] = std::polar(vm(i), va(i));
  Vector z(plan.size());
  for (Index k = 0; k < plan.size(); ++k) {
    const auto& d = plan.items[k];
    if (d.kind == MeasurementKind::voltage_magnitude) {
      z(k) = vm(d.bus);
      continue;
    }
    C s;
    if (d.kind == MeasurementKind::real_injection || d.kind == MeasurementKind::reactive_injection) {
      C i_inj = 0.0;
      for (Index j = 0; j < net.bus_count(); ++j) i_inj += C(net.G(d.bus, j), net.B(d.bus, j)) * V[j];
      s = V[d.bus] * std::conj(i_inj);
    } else {
      const auto& br = net.branches[d.branch];
      const Index f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
      const C ys = 1.0 / C(br.resistance, br.reactance);
      const C ysh(0.0, br.line_charging / 2.0);
      const double tap = br.tap_ratio;
      const C i_from = (ys + ysh) / (tap * tap) * V[f] - ys / tap * V[t];
      const C i_to = (ys + ysh) * V[t] - ys / tap * V[f];
      s = d.from_end ? V[f] * std::conj(i_from) : V[t] * std::conj(i_to);
    }
    const bool real = d.kind == MeasurementKind::real_injection || d.kind == MeasurementKind::real_flow;
    z(k) = real ? s.real() : s.imag();
  }
  return z;
}

}  // namespace

TEST(Holt, NearIdentitySettings) {
  HoltParams p{1.0 - 1e-12, 1e-12};
  Vector u0 = Vector::LinSpaced(5, 1.0, 2.0);
  HoltState h = holt_init(u0, p);
  Vector u = u0;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 20; ++t) {
    Vector next = u + 0.1 * Vector::NullaryExpr(5, [&] { return n01(rng); });
    auto [pred, h2] = holt_predict(next, h);
    EXPECT_LT((pred - next).cwiseAbs().maxCoeff(), 1e-9);
    h = h2;
    u = next;
  }
}

TEST(Holt, ConstantInputConverges) {
  for (auto p : {HoltParams{0.8, 0.5}, HoltParams{0.3, 0.9}, HoltParams{0.1, 0.1}}) {
    const Vector c = Vector::Constant(3, 1.7);
    HoltState h = holt_init(Vector::Constant(3, 0.2), p);
    Vector pred;
    for (int t = 0; t < 2000; ++t) std::tie(pred, h) = holt_predict(c, h);
    EXPECT_LT((pred - c).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(h.trend.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Holt, TracksLinearRamp) {
  HoltState h = holt_init(Vector::Zero(4), {0.8, 0.8});
  Vector pred;
  for (int t = 1; t <= 200; ++t) {
    const Vector u = Vector::Constant(4, static_cast<double>(t));
    std::tie(pred, h) = holt_predict(u, h);
    if (t > 50) { EXPECT_LT((pred - (u.array() + 1.0).matrix()).cwiseAbs().maxCoeff(), 1e-3) << t; }
  }
}

TEST(Holt, Linearity) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  auto rv = [&] { return Vector(Vector::NullaryExpr(6, [&] { return n01(rng); })); };
  HoltParams p{0.8, 0.5};
  HoltState hu{rv(), rv(), rv(), p}, hw{rv(), rv(), rv(), p};
  const double a = 1.3, b = -0.4;
  HoltState hc{a * hu.prediction + b * hw.prediction, a * hu.level + b * hw.level, a * hu.trend + b * hw.trend, p};
  const Vector u = rv(), w = rv();
  const Vector lhs = holt_predict(a * u + b * w, hc).first;
  const Vector rhs = a * holt_predict(u, hu).first + b * holt_predict(w, hw).first;
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Holt, RejectsBadCoefficients) {
  EXPECT_THROW((HoltParams{1.0, 0.5}.validate()), ValidationError);
  EXPECT_THROW((HoltParams{0.5, 0.0}.validate()), ValidationError);
  HoltState h = holt_init(Vector::Zero(3));
  EXPECT_THROW(holt_predict(Vector::Zero(4), h), ValidationError);
}

TEST(StatePacking, RoundTripAndSlackPinned) {
  const auto net = ieee("ieee14.cdf");
  const Vector u = initial_state(net);
  ASSERT_EQ(u.size(), 27);
  auto [vm, va] = unpack_state(u, net.bus_count(), net.slack_index);
  EXPECT_EQ(va(net.slack_index), 0.0);
  EXPECT_TRUE(pack_state(vm, va, net.slack_index) == u);
}

TEST(Measure, ZeroShuntFlatStartGivesZeroPower) {
  const auto net = zero_shunt_network();
  const auto plan = default_plan(net);
  Vector flat = pack_state(Vector::Ones(4), Vector::Zero(4), net.slack_index);
  const Vector z = measure(net, flat, plan);
  for (Index k = 0; k < plan.size(); ++k) {
    if (plan.items[k].is_power())
      EXPECT_LT(std::abs(z(k)), 1e-14) << k;
    else
      EXPECT_EQ(z(k), 1.0);
  }
}

TEST(Measure, FlatStartMagnitudesAreOne) {
  const auto net = ieee("ieee14.cdf");
  const auto plan = default_plan(net);
  const Vector z = measure(net, pack_state(Vector::Ones(14), Vector::Zero(14), 0), plan);
  for (Index k = 0; k < plan.size(); ++k)
    if (!plan.items[k].is_power()) { EXPECT_EQ(z(k), 1.0); }
}

TEST(Measure, TwoBusHandValue) {
  const auto net = parse_cdf(cdf_builder::file({{1, 3}, {2, 0}}, {{1, 2, 0.0, 1.0}}));
  ASSERT_NEAR(net.B(0, 1), 1.0, 1e-15);
  ASSERT_EQ(net.G.cwiseAbs().maxCoeff(), 0.0);
  const auto plan = make_plan(net, std::vector<std::string>{"Pinj 1", "Pinj 2", "Vmag 1", "Vmag 2"});
  Vector z = measure(net, pack_state(Vector::Ones(2), Vector{{0.0, -0.1}}, 0), plan);
  EXPECT_NEAR(z(0), std::sin(0.1), 1e-15);
  EXPECT_NEAR(z(0), 0.09983, 1e-5);
  EXPECT_NEAR(z(1), -std::sin(0.1), 1e-15);
}

TEST(Measure, MatchesComplexOracleOnArchiveCases) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.3, 0.3);
  for (const char* f : {"ieee14.cdf", "ieee30.cdf", "ieee57.cdf"}) {
    const auto net = ieee(f);
    auto plan = default_plan(net);
    for (Index k = 0; k < net.branch_count(); ++k) {
      plan.items.push_back({MeasurementKind::real_flow, 0, k, false});
      plan.items.push_back({MeasurementKind::reactive_flow, 0, k, false});
    }
    const Index nb = net.bus_count();
    Vector vm = Vector::NullaryExpr(nb, [&] { return mag(rng); });
    Vector va = Vector::NullaryExpr(nb, [&] { return ang(rng); });
    va(net.slack_index) = 0.0;
    const Vector u = pack_state(vm, va, net.slack_index);
    const Vector z = measure(net, u, plan), o = oracle_measure(net, u, plan);
    ASSERT_EQ(z.size(), plan.size());
    EXPECT_LT((z - o).cwiseAbs().maxCoeff(), 1e-10) << f;
  }
}

TEST(Measure, PhaseShiftInvariance) {
  const auto net = ieee("ieee30.cdf");
  const auto plan = default_plan(net);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-0.3, 0.3);
  Vector vm = Vector::Constant(30, 1.02);
  Vector va = Vector::NullaryExpr(30, [&] { return ang(rng); });
  // Shifting every phase, slack included, then re-referencing to the slack.
  Vector shifted = va.array() + 0.7;
  const Vector z1 = oracle_measure(net, pack_state(vm, va - Vector::Constant(30, va(0)), 0), plan);
  const Vector z2 = oracle_measure(net, pack_state(vm, shifted - Vector::Constant(30, shifted(0)), 0), plan);
  EXPECT_LT((z1 - z2).cwiseAbs().maxCoeff(), 1e-12);
  PowerFlowMeasurement g(net, plan);
  EXPECT_LT((g(pack_state(vm, va - Vector::Constant(30, va(0)), 0)) - z1).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Plan, DefaultSizes) {
  EXPECT_EQ(default_plan(ieee("ieee14.cdf")).size(), 3 * 14 + 2 * 20);
  EXPECT_EQ(default_plan(ieee("ieee30.cdf")).size(), 172);
  EXPECT_EQ(default_plan(ieee("ieee57.cdf")).size(), 331);
}

TEST(Plan, ParsesDescriptors) {
  const auto net = ieee("ieee14.cdf");
  std::vector<std::string> s{"Vmag 3", "Pinj 4", "Qinj 5", "Pflow 4-5", "Qflow 5-4"};
  for (int i = 1; i <= 14; ++i) s.push_back("Vmag " + std::to_string(i));
  for (int i = 1; i <= 14; ++i) s.push_back("Pinj " + std::to_string(i));
  const auto plan = make_plan(net, s);
  EXPECT_EQ(plan.items[0].kind, MeasurementKind::voltage_magnitude);
  EXPECT_EQ(plan.items[0].bus, 2);
  EXPECT_EQ(plan.items[3].kind, MeasurementKind::real_flow);
  EXPECT_TRUE(plan.items[3].from_end);
  EXPECT_FALSE(plan.items[4].from_end);
  EXPECT_EQ(plan.items[3].branch, plan.items[4].branch);
  EXPECT_EQ(describe(plan.items[3], net), "Pflow 4-5");
}

TEST(Plan, RejectsBadInput) {
  const auto net = ieee("ieee14.cdf");
  EXPECT_THROW(parse_descriptor("Vmag 99", net), ValidationError);
  EXPECT_THROW(parse_descriptor("Pflow 1-14", net), ValidationError);
  EXPECT_THROW(parse_descriptor("Smag 3", net), ValidationError);
  EXPECT_THROW(parse_descriptor("Vmag", net), ValidationError);
  EXPECT_THROW(make_plan(net, std::vector<std::string>{"Vmag 1", "Vmag 2"}), ValidationError);  // m <= n
}

TEST(SimulateTruth, NoiseFreeIdentityKeepsMeasurements) {
  const auto net = ieee("ieee14.cdf");
  PowerSystemModel model(net, default_plan(net));
  const Vector u0 = initial_state(net);
  const Index n = model.state_dim(), m = model.measurement_dim();
  auto traj = simulate_truth(model, u0, {1.0 - 1e-12, 1e-12}, 10, [&] { return Vector(Vector::Zero(n)); },
                             [&] { return Vector(Vector::Zero(m)); });
  const Vector z0 = model.measure(u0);
  ASSERT_EQ(traj.states.size(), 10u);
  for (const auto& v : traj.measurements) EXPECT_LT((v - z0).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SimulateTruth, DeterministicAndFloored) {
  const auto net = ieee("ieee14.cdf");
  PowerSystemModel model(net, default_plan(net));
  auto run = [&](double q_std) {
    std::mt19937_64 rq(1), rr(2);
    std::normal_distribution<double> n01;
    return simulate_truth(
        model, initial_state(net), {}, 30,
        [&] { return Vector(q_std * Vector::NullaryExpr(model.state_dim(), [&] { return n01(rq); })); },
        [&] { return Vector(0.01 * Vector::NullaryExpr(model.measurement_dim(), [&] { return n01(rr); })); });
  };
  const auto a = run(0.01), b = run(0.01);
  for (std::size_t t = 0; t < a.states.size(); ++t) {
    EXPECT_TRUE(a.states[t] == b.states[t]);
    EXPECT_TRUE(a.measurements[t] == b.measurements[t]);
  }
  const auto wild = run(5.0);
  EXPECT_GT(wild.floor_events, 0);
  for (const auto& u : wild.states) EXPECT_GE(u.head(14).minCoeff(), kMagnitudeFloor);
  EXPECT_THROW(simulate_truth(model, initial_state(net), {}, 0, [] { return Vector(); }, [] { return Vector(); }),
               ValidationError);
}
