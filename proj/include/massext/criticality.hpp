#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace massext {

namespace detail {

// 1 - (lambda / (lambda + u))^d, via log1p/expm1 so it neither underflows for
// large d nor cancels when u / lambda is tiny.
inline double one_minus_ratio_pow(double lambda, double u, int d) {
  if (lambda == 0.0) return 1.0;
  return -std::expm1(-static_cast<double>(d) * std::log1p(u / lambda));
}

}  // namespace detail

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
};

struct CriticalResult {
  int d = 0;
  double value = 0.0;
  double tolerance = 0.0;
  Bracket bracket;
  std::optional<double> minimizing_u;  // set for lambda_c only
};

/// lambda / (u (1 - u)) * [1 - (lambda / (lambda + u))^d] for u in (0, 1).
inline double objective(int d, double lambda, double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("u must lie in (0, 1), got " + std::to_string(u));
  return lambda / (u * (1.0 - u)) * detail::one_minus_ratio_pow(lambda, u, d);
}

struct InfimumResult {
  double value = 0.0;
  double minimizing_u = 0.0;
};

/// Infimum of `objective` over u.
///
/// A 1024-point grid on [1e-6, 1 - 1e-6] locates the basin, then golden
/// section search on the two neighbouring grid cells refines u to 1e-12. The
/// objective blows up at both ends of (0, 1), so the clipped domain cannot
/// hide the infimum.
inline InfimumResult f_d(int d, double lambda) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");

  constexpr int kGrid = 1024;
  constexpr double kLo = 1e-6;
  constexpr double kHi = 1.0 - 1e-6;
  constexpr double kStep = (kHi - kLo) / (kGrid - 1);

  int best = 0;
  double best_val = objective(d, lambda, kLo);
  for (int i = 1; i < kGrid; ++i) {
    const double v = objective(d, lambda, kLo + kStep * i);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }

  double a = kLo + kStep * std::max(best - 1, 0);
  double b = kLo + kStep * std::min(best + 1, kGrid - 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double e = a + inv_phi * (b - a);
  double fc = objective(d, lambda, c);
  double fe = objective(d, lambda, e);
  while (b - a > 1e-12) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - inv_phi * (b - a);
      fc = objective(d, lambda, c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + inv_phi * (b - a);
      fe = objective(d, lambda, e);
    }
  }
  const double u = 0.5 * (a + b);
  const double v = objective(d, lambda, u);
  if (v <= best_val) return {v, u};
  return {best_val, kLo + kStep * best};
}

/// d - 2 lambda [1 - (lambda / (lambda + 1))^d].
inline double h_d(int d, double lambda) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  return static_cast<double>(d) - 2.0 * lambda * detail::one_minus_ratio_pow(lambda, 1.0, d);
}

inline constexpr double kDefaultSolverTol = 1e-12;

// Bisection for inf{lambda : f_d(lambda) > 1} on [1e-9, 1]. Keeping
// f_d == 1 on the low side matters for large d, where f_d(1/4) rounds to
// exactly 1 while the true root sits a hair above 1/4.
inline CriticalResult solve_lambda_c(int d, double tol = kDefaultSolverTol) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  double lo = 1e-9;
  double hi = 1.0;
  if (!(f_d(d, lo).value <= 1.0 && f_d(d, hi).value > 1.0))
    throw std::logic_error("f_d - 1 does not change sign on [1e-9, 1] for d = " +
                           std::to_string(d));
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f_d(d, mid).value > 1.0)
      hi = mid;
    else
      lo = mid;
  }
  const double value = 0.5 * (lo + hi);
  return {d, value, tol, {lo, hi}, f_d(d, value).minimizing_u};
}

// h_d(0) = d > 0 and h_d -> -d, so doubling [0, hi] finds a sign change.
inline CriticalResult solve_lambda_s(int d, double tol = kDefaultSolverTol) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  double lo = 0.0;
  double hi = 1.0;
  while (h_d(d, hi) >= 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (h_d(d, mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return {d, 0.5 * (lo + hi), tol, {lo, hi}, std::nullopt};
}

}  // namespace massext
