#pragma once

// The classical 23-function minimization suite (F1-F13 scalable, F14-F23 fixed-dimension).

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>

#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"
#include "rdse/rng.hpp"

namespace rdse {

using Objective = std::function<double(const Vector&)>;

struct Benchmark {
  int id = 1;
  std::string name;
  Index dim = 30;
  double lo = -100.0, hi = 100.0;
  double optimum = 0.0;
  Vector argmin;  // one known minimizer (empty when only the value is documented)
  Objective f;

  // Branin is the only function with an uneven box.
  Vector lower() const { return id == 17 ? Vector{{-5.0, 0.0}} : Vector::Constant(dim, lo); }
  Vector upper() const { return id == 17 ? Vector{{10.0, 15.0}} : Vector::Constant(dim, hi); }
};

namespace detail {

inline double penalty_u(double x, double a, double k, double m) {
  if (x > a) return k * std::pow(x - a, m);
  if (x < -a) return k * std::pow(-x - a, m);
  return 0.0;
}

// Noise for F7 is a pure function of (x, seed) so evaluation order and threading cannot change it.
inline double hashed_uniform(const Vector& x, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  for (Index i = 0; i < x.size(); ++i) {
    std::uint64_t bits;
    const double v = x(i);
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline constexpr std::array<std::array<double, 25>, 2> kFoxholes{{
    {-32, -16, 0, 16, 32, -32, -16, 0, 16, 32, -32, -16, 0, 16, 32, -32, -16, 0, 16, 32, -32, -16, 0, 16, 32},
    {-32, -32, -32, -32, -32, -16, -16, -16, -16, -16, 0, 0, 0, 0, 0, 16, 16, 16, 16, 16, 32, 32, 32, 32, 32},
}};

inline constexpr std::array<double, 11> kKowalikA{.1957, .1947, .1735, .16, .0844, .0627, .0456, .0342, .0323, .0235, .0246};
inline constexpr std::array<double, 11> kKowalikB{.25, .5, 1, 2, 4, 6, 8, 10, 12, 14, 16};

inline constexpr double kHart3A[4][3] = {{3, 10, 30}, {.1, 10, 35}, {3, 10, 30}, {.1, 10, 35}};
inline constexpr double kHart3P[4][3] = {
    {.3689, .117, .2673}, {.4699, .4387, .747}, {.1091, .8732, .5547}, {.03815, .5743, .8828}};
inline constexpr double kHart6A[4][6] = {
    {10, 3, 17, 3.5, 1.7, 8}, {.05, 10, 17, .1, 8, 14}, {3, 3.5, 1.7, 10, 17, 8}, {17, 8, .05, 10, .1, 14}};
inline constexpr double kHart6P[4][6] = {{.1312, .1696, .5569, .0124, .8283, .5886},
                                         {.2329, .4135, .8307, .3736, .1004, .9991},
                                         {.2348, .1451, .3522, .2883, .3047, .6650},
                                         {.4047, .8828, .8732, .5743, .1091, .0381}};
inline constexpr double kHartC[4] = {1, 1.2, 3, 3.2};

inline constexpr double kShekelA[10][4] = {{4, 4, 4, 4}, {1, 1, 1, 1}, {8, 8, 8, 8}, {6, 6, 6, 6}, {3, 7, 3, 7},
                                           {2, 9, 2, 9}, {5, 5, 3, 3}, {8, 1, 8, 1}, {6, 2, 6, 2}, {7, 3.6, 7, 3.6}};
inline constexpr double kShekelC[10] = {.1, .2, .2, .4, .4, .6, .3, .7, .5, .5};

inline double shekel(const Vector& x, int terms) {
  double s = 0.0;
  for (int i = 0; i < terms; ++i) {
    double d = kShekelC[i];
    for (int j = 0; j < 4; ++j) d += (x(j) - kShekelA[i][j]) * (x(j) - kShekelA[i][j]);
    s -= 1.0 / d;
  }
  return s;
}

inline double hartman(const Vector& x, const auto& a, const auto& p, int n) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    double e = 0.0;
    for (int j = 0; j < n; ++j) e += a[i][j] * (x(j) - p[i][j]) * (x(j) - p[i][j]);
    s -= kHartC[i] * std::exp(-e);
  }
  return s;
}

}  // namespace detail

/// `dim` applies to F1-F13. `noise_seed` drives the F7 noise.
inline Benchmark benchmark(int id, Index dim = 30, std::uint64_t noise_seed = 0) {
  using std::numbers::pi;
  if (id < 1 || id > 23) throw ValidationError("benchmark id must be in 1..23, got " + std::to_string(id));
  if (id <= 13 && dim < 1) throw ValidationError("benchmark dimension must be positive");
  Benchmark b;
  b.id = id;
  b.dim = dim;
  auto at = [&](double v) { return Vector::Constant(b.dim, v); };
  switch (id) {
    case 1:
      b = {1, "sphere", dim, -100, 100, 0.0, at(0), [](const Vector& x) { return x.squaredNorm(); }};
      break;
    case 2:
      b = {2, "schwefel_2_22", dim, -10, 10, 0.0, at(0),
           [](const Vector& x) { return x.cwiseAbs().sum() + x.cwiseAbs().prod(); }};
      break;
    case 3:
      b = {3, "schwefel_1_2", dim, -100, 100, 0.0, at(0), [](const Vector& x) {
             double s = 0.0, run = 0.0;
             for (Index i = 0; i < x.size(); ++i) {
               run += x(i);
               s += run * run;
             }
             return s;
           }};
      break;
    case 4:
      b = {4, "schwefel_2_21", dim, -100, 100, 0.0, at(0), [](const Vector& x) { return x.cwiseAbs().maxCoeff(); }};
      break;
    case 5:
      b = {5, "rosenbrock", dim, -30, 30, 0.0, at(1), [](const Vector& x) {
             double s = 0.0;
             for (Index i = 0; i + 1 < x.size(); ++i)
               s += 100.0 * std::pow(x(i + 1) - x(i) * x(i), 2) + std::pow(x(i) - 1.0, 2);
             return s;
           }};
      break;
    case 6:
      b = {6, "step", dim, -100, 100, 0.0, at(0), [](const Vector& x) {
             double s = 0.0;
             for (Index i = 0; i < x.size(); ++i) s += std::pow(std::floor(x(i) + 0.5), 2);
             return s;
           }};
      break;
    case 7:
      b = {7, "quartic_noise", dim, -1.28, 1.28, 0.0, at(0), [noise_seed](const Vector& x) {
             double s = 0.0;
             for (Index i = 0; i < x.size(); ++i) s += static_cast<double>(i + 1) * std::pow(x(i), 4);
             return s + detail::hashed_uniform(x, noise_seed);
           }};
      break;
    case 8:
      b = {8, "schwefel_2_26", dim, -500, 500, -418.98288727243369 * static_cast<double>(dim), at(420.96874635998202),
           [](const Vector& x) {
             double s = 0.0;
             for (Index i = 0; i < x.size(); ++i) s -= x(i) * std::sin(std::sqrt(std::abs(x(i))));
             return s;
           }};
      break;
    case 9:
      b = {9, "rastrigin", dim, -5.12, 5.12, 0.0, at(0), [](const Vector& x) {
             double s = 0.0;
             for (Index i = 0; i < x.size(); ++i) s += x(i) * x(i) - 10.0 * std::cos(2 * pi * x(i)) + 10.0;
             return s;
           }};
      break;
    case 10:
      b = {10, "ackley", dim, -32, 32, 0.0, at(0), [](const Vector& x) {
             const double n = static_cast<double>(x.size());
             const double c = (2 * pi * x.array()).cos().sum();
             return -20.0 * std::exp(-0.2 * std::sqrt(x.squaredNorm() / n)) - std::exp(c / n) + 20.0 + std::numbers::e;
           }};
      break;
    case 11:
      b = {11, "griewank", dim, -600, 600, 0.0, at(0), [](const Vector& x) {
             double p = 1.0;
             for (Index i = 0; i < x.size(); ++i) p *= std::cos(x(i) / std::sqrt(static_cast<double>(i + 1)));
             return x.squaredNorm() / 4000.0 - p + 1.0;
           }};
      break;
    case 12:
      b = {12, "penalized_1", dim, -50, 50, 0.0, at(-1), [](const Vector& x) {
             const Index n = x.size();
             auto y = [&](Index i) { return 1.0 + (x(i) + 1.0) / 4.0; };
             double s = 10.0 * std::pow(std::sin(pi * y(0)), 2);
             for (Index i = 0; i + 1 < n; ++i)
               s += std::pow(y(i) - 1.0, 2) * (1.0 + 10.0 * std::pow(std::sin(pi * y(i + 1)), 2));
             s += std::pow(y(n - 1) - 1.0, 2);
             double pen = 0.0;
             for (Index i = 0; i < n; ++i) pen += detail::penalty_u(x(i), 10, 100, 4);
             return pi / static_cast<double>(n) * s + pen;
           }};
      break;
    case 13:
      b = {13, "penalized_2", dim, -50, 50, 0.0, at(1), [](const Vector& x) {
             const Index n = x.size();
             double s = std::pow(std::sin(3 * pi * x(0)), 2);
             for (Index i = 0; i + 1 < n; ++i)
               s += std::pow(x(i) - 1.0, 2) * (1.0 + std::pow(std::sin(3 * pi * x(i + 1)), 2));
             s += std::pow(x(n - 1) - 1.0, 2) * (1.0 + std::pow(std::sin(2 * pi * x(n - 1)), 2));
             double pen = 0.0;
             for (Index i = 0; i < n; ++i) pen += detail::penalty_u(x(i), 5, 100, 4);
             return 0.1 * s + pen;
           }};
      break;
    case 14:
      b = {14, "shekel_foxholes", 2, -65.536, 65.536, 0.99800383779444, Vector{{-32.0, -32.0}}, [](const Vector& x) {
             double s = 1.0 / 500.0;
             for (int j = 0; j < 25; ++j)
               s += 1.0 / (j + 1 + std::pow(x(0) - detail::kFoxholes[0][j], 6) +
                           std::pow(x(1) - detail::kFoxholes[1][j], 6));
             return 1.0 / s;
           }};
      break;
    case 15:
      b = {15, "kowalik", 4, -5, 5, 3.0748598e-4, Vector{{0.1928, 0.1908, 0.1231, 0.1358}}, [](const Vector& x) {
             double s = 0.0;
             for (int i = 0; i < 11; ++i) {
               const double bi = 1.0 / detail::kKowalikB[i];
               const double r = detail::kKowalikA[i] - x(0) * (bi * bi + bi * x(1)) / (bi * bi + bi * x(2) + x(3));
               s += r * r;
             }
             return s;
           }};
      break;
    case 16:
      b = {16, "six_hump_camel", 2, -5, 5, -1.0316284534898774, Vector{{0.08984201368301331, -0.7126564032704135}},
           [](const Vector& x) {
             const double a = x(0), c = x(1);
             return 4 * a * a - 2.1 * std::pow(a, 4) + std::pow(a, 6) / 3 + a * c - 4 * c * c + 4 * std::pow(c, 4);
           }};
      break;
    case 17:
      b = {17, "branin", 2, -5, 15, 0.39788735772973816, Vector{{pi, 2.275}}, [](const Vector& x) {
             const double t = x(1) - 5.1 / (4 * pi * pi) * x(0) * x(0) + 5 / pi * x(0) - 6;
             return t * t + 10 * (1 - 1 / (8 * pi)) * std::cos(x(0)) + 10;
           }};
      break;
    case 18:
      b = {18, "goldstein_price", 2, -2, 2, 3.0, Vector{{0.0, -1.0}}, [](const Vector& x) {
             const double a = x(0), c = x(1);
             const double p = 1 + std::pow(a + c + 1, 2) * (19 - 14 * a + 3 * a * a - 14 * c + 6 * a * c + 3 * c * c);
             const double q = 30 + std::pow(2 * a - 3 * c, 2) * (18 - 32 * a + 12 * a * a + 48 * c - 36 * a * c + 27 * c * c);
             return p * q;
           }};
      break;
    case 19:
      b = {19, "hartman_3", 3, 0, 1, -3.8627797869493365, Vector{{0.114614, 0.555649, 0.852547}},
           [](const Vector& x) { return detail::hartman(x, detail::kHart3A, detail::kHart3P, 3); }};
      break;
    case 20:
      b = {20, "hartman_6", 6, 0, 1, -3.3223680114155147,
           Vector{{0.20168952, 0.15001069, 0.47687398, 0.27533243, 0.31165162, 0.65730054}},
           [](const Vector& x) { return detail::hartman(x, detail::kHart6A, detail::kHart6P, 6); }};
      break;
    case 21:
    case 22:
    case 23: {
      const int terms = id == 21 ? 5 : id == 22 ? 7 : 10;
      const double opt = id == 21 ? -10.153199679058231 : id == 22 ? -10.402940566818664 : -10.536409816692046;
      b = {id, "shekel_" + std::to_string(terms), 4, 0, 10, opt, Vector::Constant(4, 4.0),
           [terms](const Vector& x) { return detail::shekel(x, terms); }};
      break;
    }
  }
  return b;
}

}  // namespace rdse
