#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "massext/criticality.hpp"
#include "massext/errors.hpp"
#include "massext/parallel.hpp"
#include "massext/rng.hpp"
#include "massext/stats.hpp"

namespace massext {

// Time for a fixed child slot to be filled by an immortal parent: a uniform
// mixture over i = 1..d of Gamma(i, lambda).
struct WSample {
  double value = 0.0;
  int component = 1;
};

inline WSample sample_W(int d, double lambda, Rng& rng) {
  const int i = std::uniform_int_distribution<int>{1, d}(rng);
  std::exponential_distribution<double> exp{lambda};
  double w = 0.0;
  for (int j = 0; j < i; ++j) w += exp(rng);
  return {w, i};
}

/// E[exp(-u W)] = lambda / (u d) [1 - (lambda / (lambda + u))^d].
inline double w_laplace(int d, double lambda, double u) {
  if (!(u > 0.0)) throw std::invalid_argument("w_laplace needs u > 0, got " + std::to_string(u));
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  return lambda / (u * static_cast<double>(d)) * detail::one_minus_ratio_pow(lambda, u, d);
}

inline double mean_Z(int d, double lambda) {
  return 1.0 - (static_cast<double>(d) + 1.0) / (2.0 * lambda);
}

struct ProbEstimate {
  double p_hat = 0.0;
  double std_error = 0.0;
  Interval ci95;
  std::uint64_t n = 0;
  std::uint64_t hits = 0;
};

inline constexpr std::uint64_t kOracleBlock = 1u << 15;

namespace detail {

inline std::uint64_t block_count(std::uint64_t n) { return (n + kOracleBlock - 1) / kOracleBlock; }

inline std::uint64_t block_size(std::uint64_t n, std::uint64_t b) {
  return std::min(kOracleBlock, n - b * kOracleBlock);
}

}  // namespace detail

/// Monte Carlo estimate of P(W_1 + ... + W_j < K_1 + ... + K_j for j = 1..k),
/// the chance that a fixed level-k vertex is ever occupied.
///
/// Samples are drawn in blocks of kOracleBlock, block b using substream
/// (master_seed, "levelk", k, b). Normal-approximation standard errors are
/// replaced by the Wilson interval when fewer than 25 hits are observed.
inline ProbEstimate estimate_levelk_prob(int d, double lambda, int k, std::uint64_t n_samples,
                                         std::uint64_t master_seed, unsigned threads = 0) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (d < 1 || !(lambda > 0.0)) throw std::invalid_argument("need d >= 1 and lambda > 0");

  const std::uint64_t blocks = detail::block_count(n_samples);
  std::vector<std::uint64_t> hits(blocks, 0);
  parallel_for(blocks, threads, [&](std::size_t b) {
    Rng rng = make_rng(derive_seed(master_seed, "levelk", static_cast<std::uint64_t>(k), b));
    std::exponential_distribution<double> clock{1.0};
    std::uint64_t h = 0;
    for (std::uint64_t s = 0, m = detail::block_size(n_samples, b); s < m; ++s) {
      double walk = 0.0;
      bool ok = true;
      for (int j = 0; j < k && ok; ++j) {
        walk += clock(rng) - sample_W(d, lambda, rng).value;
        ok = walk > 0.0;
      }
      h += ok ? 1 : 0;
    }
    hits[b] = h;
  });

  ProbEstimate est;
  est.n = n_samples;
  for (auto h : hits) est.hits += h;
  const double nn = static_cast<double>(n_samples);
  est.p_hat = static_cast<double>(est.hits) / nn;
  if (est.hits >= 25) {
    est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / nn);
    est.ci95 = {est.p_hat - kZ95 * est.std_error, est.p_hat + kZ95 * est.std_error};
  } else {
    est.ci95 = wilson_interval(est.hits, n_samples);
    est.std_error = (est.ci95.hi - est.ci95.lo) / (2.0 * kZ95);
  }
  return est;
}

/// Same probability, estimated under the exponential change of measure with
/// parameter u: K ~ Exp(1 - u), W's mixture weights proportional to
/// (lambda / (lambda + u))^i with Gamma(i, lambda + u) components. Each path
/// is weighted by psi(u)^k exp(-u S_k), psi(u) = E[exp(u (K - W))], which
/// keeps the estimator unbiased for any u in (0, 1) and makes probabilities
/// of order psi(u)^k reachable with modest sample sizes.
inline ProbEstimate estimate_levelk_prob_tilted(int d, double lambda, int k,
                                                std::uint64_t n_samples,
                                                std::uint64_t master_seed, double u,
                                                unsigned threads = 0) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (d < 1 || !(lambda > 0.0)) throw std::invalid_argument("need d >= 1 and lambda > 0");
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("tilt u must lie in (0, 1)");

  const double log_psi = std::log(w_laplace(d, lambda, u)) - std::log1p(-u);
  const double ratio = lambda / (lambda + u);
  std::vector<double> weights;
  for (int i = 1; i <= d; ++i) weights.push_back(std::pow(ratio, i));

  struct Partial {
    std::uint64_t hits = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  const std::uint64_t blocks = detail::block_count(n_samples);
  std::vector<Partial> parts(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    Rng rng =
        make_rng(derive_seed(master_seed, "levelk_tilted", static_cast<std::uint64_t>(k), b));
    std::exponential_distribution<double> clock{1.0 - u};
    std::exponential_distribution<double> birth{lambda + u};
    std::discrete_distribution<int> component(weights.begin(), weights.end());
    Partial p;
    for (std::uint64_t s = 0, m = detail::block_size(n_samples, b); s < m; ++s) {
      double walk = 0.0;
      bool ok = true;
      for (int j = 0; j < k && ok; ++j) {
        double w = 0.0;
        for (int c = component(rng); c >= 0; --c) w += birth(rng);
        walk += clock(rng) - w;
        ok = walk > 0.0;
      }
      if (ok) {
        const double weight = std::exp(static_cast<double>(k) * log_psi - u * walk);
        ++p.hits;
        p.sum += weight;
        p.sum_sq += weight * weight;
      }
    }
    parts[b] = p;
  });

  ProbEstimate est;
  est.n = n_samples;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& p : parts) {
    est.hits += p.hits;
    sum += p.sum;
    sum_sq += p.sum_sq;
  }
  const double nn = static_cast<double>(n_samples);
  est.p_hat = sum / nn;
  const double var = n_samples > 1 ? std::max(0.0, (sum_sq - nn * est.p_hat * est.p_hat) / (nn - 1.0))
                                   : 0.0;
  est.std_error = std::sqrt(var / nn);
  est.ci95 = {std::max(0.0, est.p_hat - kZ95 * est.std_error), est.p_hat + kZ95 * est.std_error};
  return est;
}

struct RateEstimate {
  int k = 0;
  double p_hat = 0.0;
  double std_error = 0.0;
  double log_rate = 0.0;       // (1/k) log p_hat
  double analytic_rate = 0.0;  // log(f_d(lambda) / d)
  double tilt_u = 0.0;
  std::uint64_t n_samples = 0;
};

inline void require_negative_drift(int d, double lambda) {
  if (!(lambda < (static_cast<double>(d) + 1.0) / 2.0)) {
    std::ostringstream msg;
    msg << "large-deviation rate needs lambda < (d+1)/2 so that E[K - W] < 0; got d = " << d
        << ", lambda = " << lambda;
    throw PreconditionError(msg.str());
  }
}

/// Empirical decay rate of the level-k birth probability next to its limit
/// log(rho), rho = inf_u psi(u) = f_d(lambda) / d. The probability is
/// estimated with the tilted estimator at the minimizing u.
inline RateEstimate ld_rate(int d, double lambda, int k, std::uint64_t n_samples,
                            std::uint64_t master_seed, unsigned threads = 0) {
  require_negative_drift(d, lambda);
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  const InfimumResult inf = f_d(d, lambda);
  const ProbEstimate est =
      estimate_levelk_prob_tilted(d, lambda, k, n_samples, master_seed, inf.minimizing_u, threads);
  RateEstimate out;
  out.k = k;
  out.p_hat = est.p_hat;
  out.std_error = est.std_error;
  out.log_rate = est.p_hat > 0.0 ? std::log(est.p_hat) / static_cast<double>(k)
                                 : -std::numeric_limits<double>::infinity();
  out.analytic_rate = std::log(inf.value / static_cast<double>(d));
  out.tilt_u = inf.minimizing_u;
  out.n_samples = n_samples;
  return out;
}

}  // namespace massext
