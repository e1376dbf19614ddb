#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace massext {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr double kZ95 = 1.959963984540054;

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double z = kZ95) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  // Clamp so the interval always contains p despite rounding at p = 0 or 1.
  return {std::max(0.0, std::min(centre - half, p)), std::min(1.0, std::max(centre + half, p))};
}

/// Streaming mean/variance (Welford). Merge order matters for bit-exactness,
/// so reductions over replicas always push in replica order.
class MeanAccumulator {
 public:
  void push(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Two-sided one-sample Kolmogorov-Smirnov statistic D_n = sup |F_n - F|.
template <typename Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

// Asymptotic 1% critical value of D_n (Kolmogorov distribution quantile 1.6276).
inline double ks_critical_1pct(std::size_t n) {
  return 1.6276236115189 / std::sqrt(static_cast<double>(n));
}

// True when [a - 3 se_a, a + 3 se_a] and [b - 3 se_b, b + 3 se_b] intersect.
inline bool overlap_3sigma(double a, double se_a, double b, double se_b) {
  return std::abs(a - b) <= 3.0 * (se_a + se_b);
}

}  // namespace massext
