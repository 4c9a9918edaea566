#pragma once

// Scaled unscented transform and the matrix square-root kit it relies on.

#include <cmath>
#include <utility>

#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"

namespace rdse {

struct UtParams {
  double alpha = 1e-2;
  double beta = 1.0;
  double lambda = 0.0;

  double mu(Index n) const { return alpha * alpha * (static_cast<double>(n) + lambda) - static_cast<double>(n); }
  void validate(Index n) const {
    if (!(static_cast<double>(n) + mu(n) > 0.0)) throw ValidationError("unscented scaling requires n + mu > 0");
  }
};

struct SigmaSet {
  Matrix points;  // n x (2n+1), column 0 is the mean
  Vector mean_weights;
  Vector cov_weights;
};

/// Lower-triangular L with L L^T = m. Throws DecompositionError naming the first bad pivot (1-based).
inline Matrix chol_factor(const Matrix& m) {
  const Index n = m.rows();
  if (m.cols() != n) throw ValidationError("Cholesky input must be square");
  const double scale = max_abs(m);
  if (max_abs(m - m.transpose()) > 1e-10 * scale) throw ValidationError("Cholesky input is not symmetric");
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) throw DecompositionError(static_cast<std::size_t>(j + 1));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
  }
  return l;
}

/// Cholesky with one retry after adding 1e-10 * trace / n to the diagonal.
/// `jitter_events` is incremented when the retry path is taken.
inline Matrix chol_with_jitter(const Matrix& m, long& jitter_events) {
  try {
    return chol_factor(m);
  } catch (const DecompositionError&) {
    ++jitter_events;
    const Index n = m.rows();
    const double jitter = 1e-10 * std::abs(m.trace()) / static_cast<double>(n);
    Matrix bumped = m;
    bumped.diagonal().array() += jitter > 0.0 ? jitter : 1e-300;
    return chol_factor(bumped);
  }
}

inline void ut_weights(Index n, const UtParams& p, Vector& wm, Vector& wc) {
  p.validate(n);
  const double nd = static_cast<double>(n);
  const double mu = p.mu(n);
  wm = Vector::Constant(2 * n + 1, 1.0 / (2.0 * (nd + mu)));
  wc = wm;
  wm(0) = mu / (nd + mu);
  wc(0) = wm(0) + (1.0 - p.alpha * p.alpha + p.beta);
}

/// Sigma points from a lower-triangular square root of the covariance.
inline SigmaSet sigma_points_from_sqrt(const Vector& mean, const Matrix& sqrt_cov, const UtParams& p) {
  const Index n = mean.size();
  SigmaSet s;
  ut_weights(n, p, s.mean_weights, s.cov_weights);
  const double scale = std::sqrt(static_cast<double>(n) + p.mu(n));
  s.points.resize(n, 2 * n + 1);
  s.points.col(0) = mean;
  for (Index a = 0; a < n; ++a) {
    s.points.col(1 + a) = mean + scale * sqrt_cov.col(a);
    s.points.col(1 + n + a) = mean - scale * sqrt_cov.col(a);
  }
  return s;
}

inline SigmaSet sigma_points(const Vector& mean, const Matrix& cov, const UtParams& p) {
  p.validate(mean.size());
  return sigma_points_from_sqrt(mean, chol_factor(cov), p);
}

struct UtResult {
  Vector mean;
  Matrix cov;
  Matrix cross_cov;  // sum rho_c (psi - psi_mean)(fn(psi) - mean)^T
  Matrix images;     // fn applied to each sigma point, one column each
};

/// Weighted propagation of a sigma set through fn. `additive_cov` (may be empty) is added to cov.
template <class Fn>
UtResult ut_propagate(const SigmaSet& s, Fn&& fn, const Matrix& additive_cov = Matrix()) {
  const Index cols = s.points.cols();
  Vector first = fn(Vector(s.points.col(0)));
  UtResult r;
  r.images.resize(first.size(), cols);
  r.images.col(0) = first;
  for (Index a = 1; a < cols; ++a) r.images.col(a) = fn(Vector(s.points.col(a)));
  // Centered on the first image: the center weight can be large and negative for small alpha.
  r.mean = first + (r.images.rightCols(cols - 1).colwise() - first) * s.mean_weights.tail(cols - 1);
  const Matrix dy = r.images.colwise() - r.mean;
  const Vector x_mean = s.points * s.mean_weights;
  const Matrix dx = s.points.colwise() - x_mean;
  r.cov = dy * s.cov_weights.asDiagonal() * dy.transpose();
  r.cov = 0.5 * (r.cov + r.cov.transpose());
  if (additive_cov.size()) r.cov += additive_cov;
  r.cross_cov = dx * s.cov_weights.asDiagonal() * dy.transpose();
  return r;
}

/// Upper-triangular A (nonnegative diagonal) with A^T A = S S^T, from the QR factorization of S^T.
inline Matrix qr_cov_sqrt(const Matrix& s) {
  const Index n = s.rows();
  if (s.cols() < n) throw ValidationError("square-root block needs at least as many columns as rows");
  Eigen::HouseholderQR<Matrix> qr(s.transpose());
  Matrix a = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i)
    if (a(i, i) < 0.0) a.row(i) *= -1.0;
  return a;
}

}  // namespace rdse
