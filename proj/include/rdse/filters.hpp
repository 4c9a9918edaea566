#pragma once

// Unscented filter engine: time update, measurement statistics, the whitened regression
// form of the measurement update, the robust fixed-point gain, QR covariance update and
// Sage-Husa noise adaptation. UKF, AUKF and the correntropy/entropy variants are configurations.

#include <cmath>
#include <concepts>
#include <string>
#include <utility>

#include "rdse/criteria.hpp"
#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"
#include "rdse/psmodel.hpp"
#include "rdse/unscented.hpp"

namespace rdse {

enum class ThetaMode { constant, forgetting };

struct FilterConfig {
  UtParams ut;
  CriterionConfig criterion;
  bool adapt_noise = true;
  ThetaMode theta_mode = ThetaMode::forgetting;
  double theta = 0.5;       // constant mode
  double forgetting = 0.5;  // s in forgetting mode
  double fixed_point_tol = 1e-6;
  int fixed_point_max_iters = 100;
  bool fallback_on_divergence = true;
  double noise_floor = 1e-10;  // lower bound on adapted Q/R diagonals

  bool robust() const { return criterion.mode != CriterionMode::gaussian; }

  double theta_at(long t) const {
    if (theta_mode == ThetaMode::constant) return theta;
    return (1.0 - forgetting) / (1.0 - std::pow(forgetting, static_cast<double>(t + 1)));
  }

  void validate() const {
    criterion.validate();
    if (!(fixed_point_tol > 0.0)) throw ValidationError("fixed-point tolerance must be positive");
    if (fixed_point_max_iters < 1) throw ValidationError("fixed-point iteration cap must be at least 1");
    if (theta_mode == ThetaMode::constant && !(theta > 0.0 && theta < 1.0))
      throw ValidationError("theta must lie in (0, 1)");
    if (theta_mode == ThetaMode::forgetting && !(forgetting > 0.0 && forgetting < 1.0))
      throw ValidationError("forgetting factor must lie in (0, 1)");
    if (noise_floor < 0.0) throw ValidationError("noise floor must be nonnegative");
  }

  static FilterConfig gmmeef_aukf() { return {}; }
  static FilterConfig meef_ukf() { return with(CriterionConfig::meef(), false); }
  static FilterConfig mee_ukf() { return with(CriterionConfig::mee(), false); }
  static FilterConfig mcc_ukf() { return with(CriterionConfig::mcc(), false); }
  static FilterConfig ukf() { return with(CriterionConfig::gaussian(), false); }
  static FilterConfig aukf() { return with(CriterionConfig::gaussian(), true); }

 private:
  static FilterConfig with(CriterionConfig c, bool adapt) {
    FilterConfig f;
    f.criterion = c;
    f.adapt_noise = adapt;
    return f;
  }
};

inline const char* to_string(ThetaMode m) { return m == ThetaMode::constant ? "constant" : "forgetting"; }

struct FilterState {
  Vector mean;
  Matrix cov;
  Matrix cov_sqrt;  // lower triangular, cov = cov_sqrt cov_sqrt^T; empty means "factor cov"
  Vector q_diag;
  Vector r_diag;
  HoltState holt;
  long step = 0;
};

inline FilterState make_filter_state(Vector mean, Matrix cov, Vector q_diag, Vector r_diag,
                                     HoltParams holt = {}) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size() || q_diag.size() != mean.size())
    throw ValidationError("filter state dimensions disagree");
  if ((q_diag.array() < 0.0).any() || (r_diag.array() < 0.0).any())
    throw ValidationError("noise diagonals must be nonnegative");
  FilterState s;
  s.holt = holt_init(mean, holt);
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  s.q_diag = std::move(q_diag);
  s.r_diag = std::move(r_diag);
  return s;
}

/// u_t = F u_{t-1}, v_t = H u_t; the Holt state is carried but unused.
struct LinearModel {
  Matrix F;
  Matrix H;

  Index state_dim() const { return F.rows(); }
  Index measurement_dim() const { return H.rows(); }
  Vector transition(const Vector& u, const HoltState&) const { return F * u; }
  HoltState advance(const Vector&, const HoltState& h) const { return h; }
  Vector measure(const Vector& u) const { return H * u; }
};

template <class M>
concept FilterModel = requires(const M& m, const Vector& u, const HoltState& h) {
  { m.state_dim() } -> std::convertible_to<Index>;
  { m.measurement_dim() } -> std::convertible_to<Index>;
  { m.transition(u, h) } -> std::convertible_to<Vector>;
  { m.advance(u, h) } -> std::convertible_to<HoltState>;
  { m.measure(u) } -> std::convertible_to<Vector>;
};

struct Prior {
  Vector mean;
  Matrix cov;         // includes Q
  Matrix transition;  // f(sigma points), one column each
  HoltState holt;     // advanced with the previous posterior mean
};

struct MeasurementStats {
  Vector predicted;  // v-hat
  Matrix cross;      // P_uv, n x m
  Matrix cov;        // P_vv, includes R
  Matrix prior_sqrt; // lower Cholesky factor of the prior covariance
};

struct AremSystem {
  Vector L;  // (n+m)
  Matrix D;  // (n+m) x n
  Matrix sqrt_p;  // B_P, lower
  Vector sqrt_r;  // diagonal of B_R
  Matrix slope;   // U, m x n
  Vector prior_mean;
  Vector prior_measurement;
  Vector measurement;
};

struct StepDiagnostics {
  int iterations = 0;
  bool fallback = false;
  long jitter_events = 0;
  double relative_change = 0.0;
};

namespace detail {
inline Matrix sqrt_of(const FilterState& s, long& jitter) {
  if (s.cov_sqrt.size()) return s.cov_sqrt;
  return chol_with_jitter(s.cov, jitter);
}
}  // namespace detail

template <FilterModel Model>
Prior time_update(const FilterState& s, const Model& model, const FilterConfig& cfg, long& jitter) {
  const SigmaSet sig = sigma_points_from_sqrt(s.mean, detail::sqrt_of(s, jitter), cfg.ut);
  UtResult r = ut_propagate(sig, [&](const Vector& x) { return model.transition(x, s.holt); },
                            Matrix(s.q_diag.asDiagonal()));
  return {std::move(r.mean), std::move(r.cov), std::move(r.images), model.advance(s.mean, s.holt)};
}

template <FilterModel Model>
MeasurementStats measurement_stats(const Prior& prior, const Vector& r_diag, const Model& model,
                                   const FilterConfig& cfg, long& jitter) {
  MeasurementStats m;
  m.prior_sqrt = chol_with_jitter(prior.cov, jitter);
  const SigmaSet sig = sigma_points_from_sqrt(prior.mean, m.prior_sqrt, cfg.ut);
  UtResult r = ut_propagate(sig, [&](const Vector& x) { return model.measure(x); }, Matrix(r_diag.asDiagonal()));
  m.predicted = std::move(r.mean);
  m.cross = std::move(r.cross_cov);
  m.cov = std::move(r.cov);
  return m;
}

inline AremSystem build_arem(const Prior& prior, const MeasurementStats& ms, const Vector& v, const Vector& r_diag) {
  const Index n = prior.mean.size();
  const Index m = v.size();
  if ((r_diag.array() <= 0.0).any()) throw DecompositionError(static_cast<std::size_t>(n + 1));
  AremSystem a;
  a.sqrt_p = ms.prior_sqrt;
  a.sqrt_r = r_diag.cwiseSqrt();
  const auto lp = a.sqrt_p.triangularView<Eigen::Lower>();
  // U = (P^{-1} P_uv)^T through the Cholesky factor.
  a.slope = a.sqrt_p.transpose().triangularView<Eigen::Upper>().solve(lp.solve(ms.cross)).transpose();
  a.prior_mean = prior.mean;
  a.prior_measurement = ms.predicted;
  a.measurement = v;
  a.L.resize(n + m);
  a.L.head(n) = lp.solve(prior.mean);
  a.L.tail(m) = (v - ms.predicted + a.slope * prior.mean).cwiseQuotient(a.sqrt_r);
  a.D.resize(n + m, n);
  a.D.topRows(n) = lp.solve(Matrix::Identity(n, n));
  a.D.bottomRows(m) = a.sqrt_r.cwiseInverse().asDiagonal() * a.slope;
  return a;
}

/// K-bar = M^{-1} N with M = D^T Omega D and N = D^T Omega [0; B_R^{-1}], the
/// four-block tilde form collapsed through D.
inline Matrix robust_gain(const AremSystem& a, const Matrix& omega) {
  const Index n = a.prior_mean.size();
  const Matrix w = omega * a.D;
  const Matrix mm = a.D.transpose() * w;
  const Matrix nn = w.bottomRows(a.sqrt_r.size()).transpose() * a.sqrt_r.cwiseInverse().asDiagonal();
  Eigen::LLT<Matrix> llt(0.5 * (mm + mm.transpose()));
  if (llt.info() != Eigen::Success) throw DecompositionError(static_cast<std::size_t>(n));
  return llt.solve(nn);
}

struct FixedPointResult {
  Vector mean;
  Matrix gain;
  int iterations = 0;
  double relative_change = 0.0;
};

inline FixedPointResult fixed_point_update(const AremSystem& a, const FilterConfig& cfg) {
  const Vector innovation = a.measurement - a.prior_measurement;
  Vector u = a.prior_mean;
  double change = 0.0;
  for (int k = 1; k <= cfg.fixed_point_max_iters; ++k) {
    const Vector e = a.L - a.D * u;
    const WeightMatrices w = weight_matrices(e, cfg.criterion);
    Matrix gain = robust_gain(a, w.omega);
    Vector next = a.prior_mean + gain * innovation;
    const double denom = u.norm();
    change = denom > 0.0 ? (next - u).norm() / denom : (next - u).norm();
    if (!std::isfinite(change)) throw DivergenceError(k, change);
    u = std::move(next);
    if (change <= cfg.fixed_point_tol) return {std::move(u), std::move(gain), k, change};
  }
  throw DivergenceError(cfg.fixed_point_max_iters, change);
}

/// K = P_uv P_vv^{-1}.
inline Matrix standard_gain(const MeasurementStats& ms) {
  Eigen::LLT<Matrix> llt(ms.cov);
  if (llt.info() != Eigen::Success) throw DecompositionError(static_cast<std::size_t>(ms.cov.rows()));
  return llt.solve(ms.cross.transpose()).transpose();
}

/// Lower-triangular square root of (I - K U) P (I - K U)^T + K R K^T by QR of the stacked factor.
inline Matrix covariance_update_sqrt(const Matrix& sqrt_p, const Matrix& gain, const Matrix& slope,
                                     const Vector& sqrt_r) {
  const Index n = sqrt_p.rows();
  const Index m = sqrt_r.size();
  Matrix s(n, n + m);
  s.leftCols(n) = (Matrix::Identity(n, n) - gain * slope) * sqrt_p;
  s.rightCols(m) = gain * sqrt_r.asDiagonal();
  return qr_cov_sqrt(s).transpose();
}

inline Matrix covariance_update(const Matrix& sqrt_p, const Matrix& gain, const Matrix& slope, const Vector& sqrt_r) {
  const Matrix l = covariance_update_sqrt(sqrt_p, gain, slope, sqrt_r);
  return l * l.transpose();
}

struct AdaptedNoise {
  Vector q_diag;
  Vector r_diag;
};

namespace detail {
inline Vector revise_to_diagonal(const Matrix& m, double floor) {
  return m.rowwise().norm().cwiseMax(floor);
}
}  // namespace detail

/// Sage-Husa recursions followed by the row-norm revision to diagonal form.
/// `prior_cov` and `innovation_cov` include the current Q and R estimates.
inline AdaptedNoise adapt_noise(const Vector& q_diag, const Vector& r_diag, const Vector& innovation,
                                const Matrix& gain, const Matrix& post_cov, const Matrix& prior_cov,
                                const Matrix& innovation_cov, double theta, double floor = 0.0) {
  const Vector kv = gain * innovation;
  Matrix q = (1.0 - theta) * Matrix(q_diag.asDiagonal()) +
             theta * (kv * kv.transpose() + post_cov - prior_cov + Matrix(q_diag.asDiagonal()));
  Matrix r = (1.0 - theta) * Matrix(r_diag.asDiagonal()) +
             theta * (innovation * innovation.transpose() - innovation_cov + Matrix(r_diag.asDiagonal()));
  return {detail::revise_to_diagonal(q, floor), detail::revise_to_diagonal(r, floor)};
}

template <FilterModel Model>
FilterState step(const FilterState& s, const Vector& v, const Model& model, const FilterConfig& cfg,
                 StepDiagnostics* diag = nullptr) {
  StepDiagnostics local;
  StepDiagnostics& d = diag ? *diag : local;
  d = {};
  const long t = s.step + 1;
  try {
    if (v.size() != model.measurement_dim() || s.r_diag.size() != v.size())
      throw ValidationError("measurement dimension mismatch");
    Prior prior = time_update(s, model, cfg, d.jitter_events);
    MeasurementStats ms = measurement_stats(prior, s.r_diag, model, cfg, d.jitter_events);
    AremSystem a = build_arem(prior, ms, v, s.r_diag);

    Vector mean;
    Matrix gain;
    bool plain = !cfg.robust();
    if (!plain) {
      try {
        FixedPointResult fp = fixed_point_update(a, cfg);
        mean = std::move(fp.mean);
        gain = std::move(fp.gain);
        d.iterations = fp.iterations;
        d.relative_change = fp.relative_change;
      } catch (const DivergenceError& e) {
        if (!cfg.fallback_on_divergence) throw;
        d.iterations = e.iterations();
        d.relative_change = e.relative_change();
        d.fallback = plain = true;
      } catch (const DecompositionError&) {
        if (!cfg.fallback_on_divergence) throw;
        d.fallback = plain = true;
      }
    }
    const Vector innovation = v - ms.predicted;
    if (plain) {
      gain = standard_gain(ms);
      mean = prior.mean + gain * innovation;
    }

    FilterState next;
    next.mean = std::move(mean);
    next.cov_sqrt = covariance_update_sqrt(a.sqrt_p, gain, a.slope, a.sqrt_r);
    next.cov = next.cov_sqrt * next.cov_sqrt.transpose();
    next.holt = std::move(prior.holt);
    next.step = t;
    if (cfg.adapt_noise) {
      AdaptedNoise an = adapt_noise(s.q_diag, s.r_diag, innovation, gain, next.cov, prior.cov, ms.cov,
                                    cfg.theta_at(t), cfg.noise_floor);
      next.q_diag = std::move(an.q_diag);
      next.r_diag = std::move(an.r_diag);
    } else {
      next.q_diag = s.q_diag;
      next.r_diag = s.r_diag;
    }
    if (!next.mean.allFinite() || !next.cov.allFinite()) throw ValidationError("non-finite posterior");
    return next;
  } catch (const FilterStepError&) {
    throw;
  } catch (const std::exception& e) {
    throw FilterStepError(static_cast<int>(t), e.what());
  }
}

}  // namespace rdse
