#include <gtest/gtest.h>

#include <random>

#include "rdse/filters.hpp"

using namespace rdse;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> n01;
  return Matrix::NullaryExpr(r, c, [&] { return n01(rng); });
}

Matrix random_spd(std::mt19937_64& rng, Index n) {
  const Matrix a = random_matrix(rng, n, n);
  return a * a.transpose() / static_cast<double>(n) + 0.1 * Matrix::Identity(n, n);
}

LinearModel toy() {
  LinearModel m;
  m.F = Matrix{{1.0, 0.1}, {0.0, 1.0}};
  m.H = Matrix{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  return m;
}

FilterState toy_state() {
  return make_filter_state(Vector{{0.9, 0.45}}, 0.5 * Matrix::Identity(2, 2), Vector::Constant(2, 1e-3),
                           Vector::Constant(3, 1e-2));
}

std::vector<Vector> toy_measurements(int steps, unsigned seed, double outlier_every = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  const auto m = toy();
  Vector u{{1.0, 0.5}};
  std::vector<Vector> out;
  for (int t = 1; t <= steps; ++t) {
    u = m.F * u + 0.03 * Vector{{n01(rng), n01(rng)}};
    Vector v = m.H * u + 0.1 * Vector{{n01(rng), n01(rng), n01(rng)}};
    if (outlier_every > 0 && t % static_cast<int>(outlier_every) == 0) v(0) += 3.0;
    out.push_back(v);
  }
  return out;
}

// Plain textbook UKF coded independently of the engine: Eigen LLT factors and P - K Pvv K^T.
struct OracleUkf {
  Vector x;
  Matrix P;
  Matrix Q, R;
  UtParams ut;

  void step(const LinearModel& m, const Vector& v) {
    const Index n = x.size();
    const double lam = ut.alpha * ut.alpha * (n + ut.lambda) - n;
    std::vector<double> wm(2 * n + 1, 0.5 / (n + lam)), wc = wm;
    wm[0] = lam / (n + lam);
    wc[0] = wm[0] + 1 - ut.alpha * ut.alpha + ut.beta;
    auto sigma = [&](const Vector& mean, const Matrix& cov) {
      const Matrix l = Eigen::LLT<Matrix>((n + lam) * cov).matrixL();
      std::vector<Vector> pts{mean};
      for (Index a = 0; a < n; ++a) pts.push_back(mean + l.col(a));
      for (Index a = 0; a < n; ++a) pts.push_back(mean - l.col(a));
      return pts;
    };
    auto pts = sigma(x, P);
    Vector xp = Vector::Zero(n);
    for (std::size_t a = 0; a < pts.size(); ++a) xp += wm[a] * (m.F * pts[a]);
    Matrix pp = Q;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      const Vector d = m.F * pts[a] - xp;
      pp += wc[a] * d * d.transpose();
    }
    auto pts2 = sigma(xp, pp);
    Vector zp = Vector::Zero(v.size());
    for (std::size_t a = 0; a < pts2.size(); ++a) zp += wm[a] * (m.H * pts2[a]);
    Matrix pzz = R, pxz = Matrix::Zero(n, v.size());
    for (std::size_t a = 0; a < pts2.size(); ++a) {
      const Vector dz = m.H * pts2[a] - zp;
      pzz += wc[a] * dz * dz.transpose();
      pxz += wc[a] * (pts2[a] - xp) * dz.transpose();
    }
    const Matrix k = pxz * pzz.inverse();
    x = xp + k * (v - zp);
    P = pp - k * pzz * k.transpose();
  }
};

// Reference robust update: iterate u = argmin of the Omega-weighted regression by its normal equations.
Vector reference_robust_update(const AremSystem& a, const CriterionConfig& c, int iters) {
  Vector u = a.prior_mean;
  for (int k = 0; k < iters; ++k) {
    const Matrix om = weight_matrices(a.L - a.D * u, c).omega;
    u = (a.D.transpose() * om * a.D).ldlt().solve(a.D.transpose() * om * a.L);
  }
  return u;
}

struct RandomSystem {
  Prior prior;
  MeasurementStats ms;
  Vector v, r;
};

RandomSystem random_linear_system(std::mt19937_64& rng, Index n, Index m) {
  LinearModel model{Matrix::Identity(n, n), random_matrix(rng, m, n)};
  RandomSystem s;
  s.prior.mean = random_matrix(rng, n, 1).array() + 3.0;
  s.prior.cov = random_spd(rng, n);
  s.r = Vector::Constant(m, 0.2) + 0.1 * random_matrix(rng, m, 1).cwiseAbs();
  long jitter = 0;
  s.ms = measurement_stats(s.prior, s.r, model, FilterConfig{}, jitter);
  s.v = model.H * s.prior.mean + 0.5 * random_matrix(rng, m, 1);
  return s;
}

}  // namespace

TEST(TimeUpdate, IdentityTransitionKeepsCovariance) {
  LinearModel m{Matrix::Identity(3, 3), Matrix::Identity(4, 3)};
  std::mt19937_64 rng(1);
  auto s = make_filter_state(random_matrix(rng, 3, 1), random_spd(rng, 3), Vector::Zero(3), Vector::Ones(4));
  long jitter = 0;
  const Prior p = time_update(s, m, FilterConfig{}, jitter);
  EXPECT_LT(max_abs(p.cov - s.cov), 1e-10);
  s.q_diag = Vector::Constant(3, 0.25);
  const Prior p2 = time_update(s, m, FilterConfig{}, jitter);
  EXPECT_NEAR(p2.cov.trace(), s.cov.trace() + 3 * 0.25, 1e-10);
}

TEST(TimeUpdate, PowerSystemPriorDimensions) {
  const auto net = load_cdf(std::string(RDSE_DATA_DIR) + "/ieee14.cdf");
  PowerSystemModel model(net, default_plan(net));
  const Vector u0 = initial_state(net);
  auto s = make_filter_state(u0, 1e-2 * Matrix::Identity(27, 27), Vector::Constant(27, 1e-5),
                             Vector::Constant(model.measurement_dim(), 1e-2));
  long jitter = 0;
  const Prior p = time_update(s, model, FilterConfig{}, jitter);
  EXPECT_EQ(p.mean.size(), 27);
  EXPECT_EQ(p.cov.rows(), 27);
  EXPECT_EQ(p.cov.cols(), 27);
}

TEST(MeasurementStats, LinearCrossCovariance) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const Index n = 2 + k % 6, m = n + 3;
    const Matrix h = random_matrix(rng, m, n);
    LinearModel model{Matrix::Identity(n, n), h};
    Prior p{random_matrix(rng, n, 1), random_spd(rng, n), {}, {}};
    long jitter = 0;
    const auto ms = measurement_stats(p, Vector::Ones(m), model, FilterConfig{}, jitter);
    EXPECT_LT(max_abs(ms.cross - p.cov * h.transpose()), 1e-10);
    EXPECT_LT(max_abs(ms.cov - (h * p.cov * h.transpose() + Matrix::Identity(m, m))), 1e-10);
  }
}

TEST(MeasurementStats, ZeroPriorCovariance) {
  const auto net = load_cdf(std::string(RDSE_DATA_DIR) + "/ieee14.cdf");
  PowerSystemModel model(net, default_plan(net));
  Prior p{initial_state(net), Matrix::Zero(27, 27), {}, {}};
  long jitter = 0;
  const auto ms = measurement_stats(p, Vector::Ones(model.measurement_dim()), model, FilterConfig{}, jitter);
  EXPECT_EQ(jitter, 1);
  EXPECT_LT(max_abs(ms.cross), 1e-12);
  EXPECT_LT(max_abs(ms.predicted - model.measure(p.mean)), 1e-9);
}

TEST(MeasurementStats, FlatStartZeroShuntPredictsZeroPower) {
  PowerNetwork net;
  for (int i = 1; i <= 3; ++i) {
    BusRecord b;
    b.id = i;
    b.type = i == 1 ? BusType::slack : BusType::pq;
    net.buses.push_back(b);
  }
  for (auto [f, t] : {std::pair{1, 2}, {2, 3}, {1, 3}}) {
    BranchRecord br;
    br.from_bus = f;
    br.to_bus = t;
    br.resistance = 0.01;
    br.reactance = 0.1;
    net.branches.push_back(br);
  }
  finalize_network(net);
  PowerSystemModel model(net, default_plan(net));
  Prior p{pack_state(Vector::Ones(3), Vector::Zero(3), 0), Matrix::Zero(5, 5), {}, {}};
  long jitter = 0;
  const auto ms = measurement_stats(p, Vector::Ones(model.measurement_dim()), model, FilterConfig{}, jitter);
  for (Index k = 0; k < model.measurement_dim(); ++k)
    if (model.plan().items[k].is_power()) { EXPECT_LT(std::abs(ms.predicted(k)), 1e-12); }
}

TEST(Arem, IdentityFactorsGiveStackedDesign) {
  const Index n = 3, m = 5;
  std::mt19937_64 rng(3);
  const Matrix h = random_matrix(rng, m, n);
  LinearModel model{Matrix::Identity(n, n), h};
  Prior p{random_matrix(rng, n, 1), Matrix::Identity(n, n), {}, {}};
  long jitter = 0;
  const Vector r = Vector::Zero(m);
  auto ms = measurement_stats(p, r, model, FilterConfig{}, jitter);
  const auto a = build_arem(p, ms, random_matrix(rng, m, 1), Vector::Ones(m));
  Matrix expected(n + m, n);
  expected << Matrix::Identity(n, n), h;
  EXPECT_LT(max_abs(a.D - expected), 1e-12);
  EXPECT_THROW(build_arem(p, ms, Vector::Zero(m), r), DecompositionError);
}

TEST(Arem, TopBlockIsInverseFactor) {
  std::mt19937_64 rng(4);
  auto s = random_linear_system(rng, 4, 7);
  const auto a = build_arem(s.prior, s.ms, s.v, s.r);
  EXPECT_LT(max_abs(a.sqrt_p * a.D.topRows(4) - Matrix::Identity(4, 4)), 1e-12);
  Eigen::FullPivLU<Matrix> lu(a.D);
  EXPECT_EQ(lu.rank(), 4);
}

TEST(Arem, ResidualIsWhitened) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const Index n = 3, m = 4;
  const Matrix h = random_matrix(rng, m, n);
  LinearModel model{Matrix::Identity(n, n), h};
  Prior p{random_matrix(rng, n, 1), random_spd(rng, n), {}, {}};
  const Vector r = Vector{{0.5, 0.2, 0.3, 0.1}};
  long jitter = 0;
  const auto ms = measurement_stats(p, r, model, FilterConfig{}, jitter);
  const Matrix lp = chol_factor(p.cov);
  Matrix acc = Matrix::Zero(n + m, n + m);
  const int reps = 20000;
  for (int k = 0; k < reps; ++k) {
    const Vector u = p.mean + lp * Vector::NullaryExpr(n, [&] { return n01(rng); });
    const Vector v = h * u + r.cwiseSqrt().cwiseProduct(Vector::NullaryExpr(m, [&] { return n01(rng); }));
    const auto a = build_arem(p, ms, v, r);
    const Vector e = a.L - a.D * u;
    acc += e * e.transpose();
  }
  acc /= reps;
  EXPECT_LT(max_abs(acc - Matrix::Identity(n + m, n + m)), 0.05);
}

TEST(FixedPoint, HugeBandwidthMatchesKalmanUpdate) {
  std::mt19937_64 rng(6);
  FilterConfig cfg;
  cfg.criterion.kappa = 1.0;
  cfg.criterion.fiducial1 = cfg.criterion.fiducial2 = {2.0, 1e6};
  for (int k = 0; k < 20; ++k) {
    auto s = random_linear_system(rng, 3, 6);
    const auto a = build_arem(s.prior, s.ms, s.v, s.r);
    const auto fp = fixed_point_update(a, cfg);
    const Vector ukf = s.prior.mean + standard_gain(s.ms) * (s.v - s.ms.predicted);
    EXPECT_LT((fp.mean - ukf).norm() / ukf.norm(), 1e-6);
  }
}

TEST(FixedPoint, ZeroInnovationStopsImmediately) {
  std::mt19937_64 rng(7);
  auto s = random_linear_system(rng, 3, 6);
  const auto a = build_arem(s.prior, s.ms, s.ms.predicted, s.r);
  const auto fp = fixed_point_update(a, FilterConfig{});
  EXPECT_EQ(fp.iterations, 1);
  EXPECT_LT((fp.mean - s.prior.mean).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FixedPoint, GainScaleInvariance) {
  std::mt19937_64 rng(8);
  auto s = random_linear_system(rng, 4, 8);
  const auto a = build_arem(s.prior, s.ms, s.v, s.r);
  const auto w = weight_matrices(a.L - a.D * a.prior_mean, CriterionConfig{});
  const Matrix k1 = robust_gain(a, w.omega);
  for (double c : {1e-6, 0.3, 7.0, 1e5}) EXPECT_LT(max_abs(robust_gain(a, c * w.omega) - k1), 1e-10 * max_abs(k1));
}

TEST(FixedPoint, GainFormMatchesNormalEquations) {
  std::mt19937_64 rng(9);
  for (auto c : {CriterionConfig::gmmeef(), CriterionConfig::mcc(), CriterionConfig::mee(), CriterionConfig::meef()}) {
    for (int k = 0; k < 10; ++k) {
      auto s = random_linear_system(rng, 3, 7);
      const auto a = build_arem(s.prior, s.ms, s.v, s.r);
      FilterConfig cfg;
      cfg.criterion = c;
      cfg.fixed_point_tol = 1e-13;
      cfg.fixed_point_max_iters = 500;
      const auto fp = fixed_point_update(a, cfg);
      const Vector ref = reference_robust_update(a, c, fp.iterations);
      EXPECT_LT((fp.mean - ref).norm(), 1e-8 * std::max(1.0, ref.norm())) << to_string(c.mode);
    }
  }
}

TEST(FixedPoint, IterationCapRaisesDivergence) {
  std::mt19937_64 rng(10);
  auto s = random_linear_system(rng, 3, 7);
  const auto a = build_arem(s.prior, s.ms, s.v, s.r);
  FilterConfig cfg;
  cfg.fixed_point_tol = 1e-300;
  cfg.fixed_point_max_iters = 3;
  try {
    fixed_point_update(a, cfg);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.iterations(), 3);
  }
}

TEST(CovarianceUpdate, ZeroGainKeepsPrior) {
  std::mt19937_64 rng(11);
  const Matrix p = random_spd(rng, 5);
  const Matrix lp = chol_factor(p);
  const Matrix out = covariance_update(lp, Matrix::Zero(5, 3), random_matrix(rng, 3, 5), Vector::Ones(3));
  EXPECT_LT(max_abs(out - p), 1e-12);
}

TEST(CovarianceUpdate, MatchesJosephForm) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 1000; ++k) {
    const Index n = 1 + k % 8, m = 1 + (k * 3) % 10;
    const Matrix p = random_spd(rng, n);
    const Vector r = Vector::Constant(m, 0.1) + random_matrix(rng, m, 1).cwiseAbs();
    const Matrix kk = random_matrix(rng, n, m), u = random_matrix(rng, m, n);
    const Matrix iku = Matrix::Identity(n, n) - kk * u;
    const Matrix joseph = iku * p * iku.transpose() + kk * r.asDiagonal() * kk.transpose();
    const Matrix out = covariance_update(chol_factor(p), kk, u, r.cwiseSqrt());
    EXPECT_LE(max_abs(out - joseph), 1e-9 * max_abs(joseph));
    Eigen::SelfAdjointEigenSolver<Matrix> es(out);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * out.trace());
  }
}

TEST(AdaptNoise, FixedPointWhenPosteriorEqualsPrior) {
  std::mt19937_64 rng(13);
  const Index n = 4, m = 6;
  const Vector q = Vector::Constant(n, 0.02);
  const Matrix p = random_spd(rng, n);
  const auto an = adapt_noise(q, Vector::Ones(m), Vector::Zero(m), random_matrix(rng, n, m), p, p,
                              Matrix::Identity(m, m), 0.3);
  EXPECT_LT((an.q_diag - q).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdaptNoise, PosteriorBelowPriorByQShrinksEstimate) {
  std::mt19937_64 rng(14);
  const Index n = 3, m = 5;
  const Vector q = Vector::Constant(n, 0.02);
  const Matrix p = random_spd(rng, n) + Matrix(q.asDiagonal());
  const double theta = 0.3;
  const auto an = adapt_noise(q, Vector::Ones(m), Vector::Zero(m), random_matrix(rng, n, m),
                              p - Matrix(q.asDiagonal()), p, Matrix::Identity(m, m), theta);
  EXPECT_LT((an.q_diag - (1 - theta) * q).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdaptNoise, OutputsAreNonnegativeRowNorms) {
  std::mt19937_64 rng(15);
  for (int k = 0; k < 200; ++k) {
    const Index n = 3, m = 4;
    const Vector q = random_matrix(rng, n, 1).cwiseAbs(), r = random_matrix(rng, m, 1).cwiseAbs();
    const Vector inn = random_matrix(rng, m, 1);
    const Matrix kk = random_matrix(rng, n, m), pp = random_spd(rng, n), pm = random_spd(rng, n),
                 pvv = random_spd(rng, m);
    const auto an = adapt_noise(q, r, inn, kk, pp, pm, pvv, 0.4);
    EXPECT_GE(an.q_diag.minCoeff(), 0.0);
    EXPECT_GE(an.r_diag.minCoeff(), 0.0);
    const Matrix rr = 0.6 * Matrix(r.asDiagonal()) + 0.4 * (inn * inn.transpose() - pvv + Matrix(r.asDiagonal()));
    EXPECT_LT((an.r_diag - rr.rowwise().norm()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Config, ThetaSchedules) {
  FilterConfig cfg;
  EXPECT_NEAR(cfg.theta_at(1), 0.5 / 0.75, 1e-15);
  EXPECT_NEAR(cfg.theta_at(60), 0.5, 1e-12);
  cfg.theta_mode = ThetaMode::constant;
  cfg.theta = 0.2;
  EXPECT_EQ(cfg.theta_at(5), 0.2);
  cfg.theta = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  FilterConfig bad;
  bad.fixed_point_tol = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = FilterConfig{};
  bad.fixed_point_max_iters = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Step, GaussianModeMatchesTextbookUkf) {
  const auto model = toy();
  FilterConfig cfg = FilterConfig::ukf();
  FilterState s = toy_state();
  OracleUkf o{s.mean, s.cov, Matrix(s.q_diag.asDiagonal()), Matrix(s.r_diag.asDiagonal()), cfg.ut};
  for (const auto& v : toy_measurements(60, 21)) {
    s = step(s, v, model, cfg);
    o.step(model, v);
    EXPECT_LT((s.mean - o.x).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(max_abs(s.cov - o.P), 1e-10);
  }
}

TEST(Step, HugeBandwidthReducesToGaussianMode) {
  const auto model = toy();
  FilterConfig robust;
  robust.adapt_noise = false;
  robust.criterion.kappa = 1.0;
  robust.criterion.fiducial1 = robust.criterion.fiducial2 = {2.0, 1e6};
  FilterState a = toy_state(), b = toy_state();
  for (const auto& v : toy_measurements(60, 22)) {
    a = step(a, v, model, robust);
    b = step(b, v, model, FilterConfig::ukf());
    EXPECT_LT((a.mean - b.mean).norm() / b.mean.norm(), 1e-6);
  }
}

TEST(Step, RobustFilterResistsOutliers) {
  const auto model = toy();
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n01;
  Vector u{{0.0, 0.05}};
  FilterState a = toy_state(), b = toy_state();
  double err_robust = 0.0, err_plain = 0.0;
  FilterConfig mcc = FilterConfig::mcc_ukf();
  mcc.criterion = CriterionConfig::mcc(2.0);
  for (int t = 1; t <= 300; ++t) {
    u = model.F * u + 0.03 * Vector{{n01(rng), n01(rng)}};
    Vector v = model.H * u + 0.1 * Vector{{n01(rng), n01(rng), n01(rng)}};
    if (t % 7 == 0) v(t % 3) += 5.0;
    a = step(a, v, model, mcc);
    b = step(b, v, model, FilterConfig::ukf());
    err_robust += (a.mean - u).squaredNorm();
    err_plain += (b.mean - u).squaredNorm();
  }
  EXPECT_LT(err_robust, 0.5 * err_plain);
}

TEST(Step, DivergenceFallsBackOrRaises) {
  const auto model = toy();
  FilterConfig cfg;
  cfg.fixed_point_tol = 1e-300;
  cfg.fixed_point_max_iters = 2;
  StepDiagnostics d;
  const auto v = toy_measurements(1, 24)[0];
  const auto out = step(toy_state(), v, model, cfg, &d);
  EXPECT_TRUE(d.fallback);
  EXPECT_EQ(d.iterations, 2);
  FilterConfig plain = FilterConfig::ukf();
  plain.adapt_noise = true;
  const auto ref = step(toy_state(), v, model, plain);
  EXPECT_LT((out.mean - ref.mean).norm(), 1e-14);
  cfg.fallback_on_divergence = false;
  try {
    step(toy_state(), v, model, cfg);
    FAIL();
  } catch (const FilterStepError& e) {
    EXPECT_EQ(e.step(), 1);
  }
}

TEST(Step, RejectsDimensionMismatch) {
  EXPECT_THROW(step(toy_state(), Vector::Zero(2), toy(), FilterConfig{}), FilterStepError);
}

TEST(Step, PowerSystemCovarianceStaysSpd) {
  const auto net = load_cdf(std::string(RDSE_DATA_DIR) + "/ieee14.cdf");
  PowerSystemModel model(net, default_plan(net));
  const Vector u0 = initial_state(net);
  std::mt19937_64 rng(25);
  std::normal_distribution<double> n01;
  auto truth = simulate_truth(
      model, u0, {}, 30, [&] { return Vector(std::sqrt(1e-5) * Vector::NullaryExpr(27, [&] { return n01(rng); })); },
      [&] { return Vector(0.1 * Vector::NullaryExpr(model.measurement_dim(), [&] { return n01(rng); })); });
  auto s = make_filter_state(u0, 1e-2 * Matrix::Identity(27, 27), Vector::Constant(27, 1e-5),
                             Vector::Constant(model.measurement_dim(), 1e-2));
  int iters_max = 0;
  for (const auto& v : truth.measurements) {
    StepDiagnostics d;
    s = step(s, v, model, FilterConfig{}, &d);
    iters_max = std::max(iters_max, d.iterations);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.cov);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * s.cov.trace());
    EXPECT_GE(s.q_diag.minCoeff(), 0.0);
    EXPECT_GE(s.r_diag.minCoeff(), 0.0);
  }
  EXPECT_GT(iters_max, 0);
}

TEST(Step, PowerSystemUkfTracksTruth) {
  const auto net = load_cdf(std::string(RDSE_DATA_DIR) + "/ieee14.cdf");
  PowerSystemModel model(net, default_plan(net));
  const Vector u0 = initial_state(net);
  std::mt19937_64 rng(26);
  std::normal_distribution<double> n01;
  auto truth = simulate_truth(
      model, u0, {}, 40, [&] { return Vector(std::sqrt(1e-5) * Vector::NullaryExpr(27, [&] { return n01(rng); })); },
      [&] { return Vector(0.1 * Vector::NullaryExpr(model.measurement_dim(), [&] { return n01(rng); })); });
  auto s = make_filter_state(u0, 1e-2 * Matrix::Identity(27, 27), Vector::Constant(27, 1e-5),
                             Vector::Constant(model.measurement_dim(), 1e-2));
  double worst_late = 0.0;
  for (std::size_t t = 0; t < truth.measurements.size(); ++t) {
    s = step(s, truth.measurements[t], model, FilterConfig::ukf());
    if (t >= 20) worst_late = std::max(worst_late, (s.mean - truth.states[t]).head(14).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst_late, 0.06);
}
