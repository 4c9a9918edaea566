#pragma once

// Generalized-Gaussian kernel, the mixture-correntropy / error-entropy cost, and the
// weight matrices of its fixed-point solution. MCC, MEE and MEEF are configurations.

#include <cmath>
#include <span>
#include <string>

#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"

namespace rdse {

struct KernelParams {
  double shape = 2.0;      // alpha_i
  double bandwidth = 1.0;  // beta_i

  double normalization() const { return shape / (2.0 * bandwidth * std::tgamma(1.0 / shape)); }
  void validate() const {
    if (!(shape > 0.0) || !(bandwidth > 0.0) || !std::isfinite(normalization()))
      throw ValidationError("kernel shape and bandwidth must be positive");
  }
};

/// [alpha / (2 beta Gamma(1/alpha))] exp(-|e|^alpha / beta)
inline double gg_kernel(double e, const KernelParams& k) {
  return k.normalization() * std::exp(-std::pow(std::abs(e), k.shape) / k.bandwidth);
}

enum class CriterionMode { gmmeef, meef, mee, mcc, gaussian };
enum class LambdaPrefactor { as_printed, kernel_gradient };

inline const char* to_string(CriterionMode m) {
  switch (m) {
    case CriterionMode::gmmeef: return "GMMEEF";
    case CriterionMode::meef: return "MEEF";
    case CriterionMode::mee: return "MEE";
    case CriterionMode::mcc: return "MCC";
    case CriterionMode::gaussian: return "GAUSSIAN";
  }
  return "GMMEEF";
}

inline CriterionMode criterion_mode_from_string(const std::string& s) {
  for (auto m : {CriterionMode::gmmeef, CriterionMode::meef, CriterionMode::mee, CriterionMode::mcc,
                 CriterionMode::gaussian})
    if (s == to_string(m)) return m;
  throw ValidationError("unknown criterion mode '" + s + "'");
}

struct CriterionConfig {
  double kappa = 0.5;
  double phi = 0.5;
  KernelParams fiducial1{2.1, 6.3};
  KernelParams fiducial2{2.1, 6.3};
  KernelParams entropy{2.9, 3.2};
  CriterionMode mode = CriterionMode::gmmeef;
  LambdaPrefactor lambda_prefactor = LambdaPrefactor::as_printed;
  // |gap| is floored at this value when a kernel shape below 2 would make |gap|^(shape-2) blow up.
  double gap_floor = 1e-8;

  void validate() const {
    if (!(kappa >= 0.0 && kappa <= 1.0) || !(phi >= 0.0 && phi <= 1.0))
      throw ValidationError("kappa and phi must lie in [0, 1]");
    fiducial1.validate();
    fiducial2.validate();
    entropy.validate();
    if (gap_floor < 0.0) throw ValidationError("gap floor must be nonnegative");
  }

  static CriterionConfig gmmeef() { return {}; }
  /// Gaussian kernels everywhere, single fiducial kernel.
  static CriterionConfig meef(double fiducial_bw = 6.3, double entropy_bw = 3.2) {
    CriterionConfig c;
    c.mode = CriterionMode::meef;
    c.phi = 1.0;
    c.fiducial1 = c.fiducial2 = {2.0, fiducial_bw};
    c.entropy = {2.0, entropy_bw};
    return c;
  }
  static CriterionConfig mee(double entropy_bw = 3.2) {
    CriterionConfig c = meef(6.3, entropy_bw);
    c.mode = CriterionMode::mee;
    c.kappa = 0.0;
    return c;
  }
  static CriterionConfig mcc(double bw = 6.3) {
    CriterionConfig c = meef(bw, 3.2);
    c.mode = CriterionMode::mcc;
    c.kappa = 1.0;
    return c;
  }
  static CriterionConfig gaussian() {
    CriterionConfig c = mcc(1e6);
    c.mode = CriterionMode::gaussian;
    return c;
  }
};

inline double gmmeef_cost(std::span<const double> errors, const CriterionConfig& c) {
  if (errors.empty()) throw ValidationError("cost needs at least one error");
  double fid = 0.0, ent = 0.0;
  for (double e : errors) fid += c.phi * gg_kernel(e, c.fiducial1) + (1.0 - c.phi) * gg_kernel(e, c.fiducial2);
  for (double ei : errors)
    for (double ej : errors) ent += gg_kernel(ej - ei, c.entropy);
  return c.kappa * fid + (1.0 - c.kappa) * ent;
}

struct WeightMatrices {
  Vector lambda;  // diagonal of Lambda
  Vector phi;     // diagonal of Phi
  Matrix xi;      // Xi, symmetric
  Matrix omega;   // kappa Lambda + (1 - kappa)(Phi - Xi)

  // Blocks with n the state dimension.
  auto omega_uu(Index n) const { return omega.topLeftCorner(n, n); }
  auto omega_vu(Index n) const { return omega.topRightCorner(n, omega.cols() - n); }
  auto omega_uv(Index n) const { return omega.bottomLeftCorner(omega.rows() - n, n); }
  auto omega_vv(Index n) const { return omega.bottomRightCorner(omega.rows() - n, omega.cols() - n); }
};

namespace detail {

// G(gap) |gap|^(shape-2) with the zero-gap conventions: 0 for shape > 2, G(0) for shape == 2,
// floored |gap| for shape < 2 (an error when the floor is disabled).
inline double kernel_weight(double gap, const KernelParams& k, double norm, double floor) {
  double a = std::abs(gap);
  if (k.shape == 2.0) return norm * std::exp(-a * a / k.bandwidth);
  if (a == 0.0) {
    if (k.shape > 2.0) return 0.0;
    if (floor <= 0.0) throw ValidationError("kernel shape below 2 with a zero error gap needs a positive gap floor");
  }
  if (k.shape < 2.0) a = std::max(a, floor);
  const double la = std::log(a);
  return std::max(0.0, norm * std::exp(-std::exp(k.shape * la) / k.bandwidth + (k.shape - 2.0) * la));
}

}  // namespace detail

inline WeightMatrices weight_matrices(const Vector& e, const CriterionConfig& c) {
  const Index n = e.size();
  WeightMatrices w;
  w.lambda = Vector::Zero(n);
  w.phi = Vector::Zero(n);
  w.xi = Matrix::Zero(n, n);

  const KernelParams f[2] = {c.fiducial1, c.fiducial2};
  const double mix[2] = {c.phi, 1.0 - c.phi};
  if (c.kappa > 0.0) {
    for (int j = 0; j < 2; ++j) {
      if (mix[j] == 0.0) continue;
      const double pre = c.lambda_prefactor == LambdaPrefactor::as_printed
                             ? f[j].shape / std::pow(f[j].bandwidth, f[j].shape)
                             : f[j].shape / f[j].bandwidth;
      const double norm = f[j].normalization();
      for (Index i = 0; i < n; ++i) w.lambda(i) += mix[j] * pre * detail::kernel_weight(e(i), f[j], norm, c.gap_floor);
    }
  }
  if (c.kappa < 1.0) {
    const double norm = c.entropy.normalization();
    for (Index i = 0; i < n; ++i) {
      w.xi(i, i) = c.entropy.shape >= 2.0 ? 0.0 : detail::kernel_weight(0.0, c.entropy, norm, c.gap_floor);
      for (Index j = i + 1; j < n; ++j) {
        const double v = detail::kernel_weight(e(j) - e(i), c.entropy, norm, c.gap_floor);
        w.xi(i, j) = v;
        w.xi(j, i) = v;
      }
    }
    w.phi = w.xi.rowwise().sum();
  }
  w.omega = (1.0 - c.kappa) * (Matrix(w.phi.asDiagonal()) - w.xi);
  w.omega.diagonal() += c.kappa * w.lambda;
  return w;
}

/// Row sums of (Phi - Xi).
inline Vector diag_weight_row_sums(const WeightMatrices& w) { return w.phi - w.xi.rowwise().sum(); }

}  // namespace rdse
