#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "massext/criticality.hpp"
#include "massext/engine.hpp"
#include "massext/parallel.hpp"
#include "massext/rng.hpp"
#include "massext/stats.hpp"

namespace massext {

/// Up-step probability of the clan-size chain along a fixed branch:
/// (lambda / d) [1 - (lambda / (1 + lambda))^d], the same for every clan size.
inline double p_up(int d, double lambda) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  return lambda / static_cast<double>(d) * detail::one_minus_ratio_pow(lambda, 1.0, d);
}

struct ChainParams {
  int d = 0;
  double lambda = 0.0;
  double p = 0.0;
  double q = 1.0;
  double extinction_prob = 1.0;
};

// Gambler's ruin from state 1: certain absorption iff q >= p, else q / p.
inline double extinction_prob_branch(int d, double lambda) {
  const double p = p_up(d, lambda);
  const double q = 1.0 - p;
  if (q >= p) return 1.0;
  return q / p;
}

inline ChainParams chain_params(int d, double lambda) {
  const double p = p_up(d, lambda);
  return {d, lambda, p, 1.0 - p, extinction_prob_branch(d, lambda)};
}

struct ChainExtinct {
  std::uint64_t steps;
};
struct ChainCensored {
  std::uint64_t max_steps;
};

struct ChainRun {
  std::variant<ChainExtinct, ChainCensored> outcome;
  std::uint64_t max_clan_size = 1;
  std::uint64_t up_moves = 0;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;

  bool extinct() const { return std::holds_alternative<ChainExtinct>(outcome); }
};

// One transition of the embedded chain; returns the new clan size.
namespace detail {

// Up move iff rng() < threshold; p = 1 maps to the all-ones sentinel.
inline std::uint64_t up_threshold(double p) {
  if (p >= 1.0) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(std::ldexp(p, 64));
}

inline std::uint64_t chain_step_fast(std::uint64_t state, std::uint64_t threshold, Rng& rng) {
  const std::uint64_t r = rng();
  const std::uint64_t up =
      (threshold == std::numeric_limits<std::uint64_t>::max()) | (r < threshold);
  return state - 1 + 2 * up;
}

}  // namespace detail

inline std::uint64_t chain_step(std::uint64_t state, double p, Rng& rng) {
  return detail::chain_step_fast(state, detail::up_threshold(p), rng);
}

inline ChainRun simulate_chain_p(double p, std::uint64_t max_steps, std::uint64_t seed) {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  Rng rng = make_rng(seed);
  const std::uint64_t threshold = detail::up_threshold(p);
  std::uint64_t x = 1, peak = 1, ups = 0, steps = 0;
  while (steps < max_steps) {
    const std::uint64_t next = detail::chain_step_fast(x, threshold, rng);
    ++steps;
    ups += next > x;
    x = next;
    peak = std::max(peak, x);
    if (x == 0) return ChainRun{ChainExtinct{steps}, peak, ups, steps, seed};
  }
  return ChainRun{ChainCensored{max_steps}, peak, ups, steps, seed};
}

inline ChainRun simulate_chain(int d, double lambda, std::uint64_t max_steps,
                               std::uint64_t seed) {
  return simulate_chain_p(p_up(d, lambda), max_steps, seed);
}

inline constexpr std::string_view kBranchTag = "branch_extinction";

struct ChainEstimate {
  std::uint64_t n = 0;
  std::uint64_t extinct = 0;
  std::uint64_t censored = 0;
  double extinction_fraction = 0.0;
  Interval wilson_95;
  double std_error = 0.0;
};

inline ChainEstimate estimate_branch_extinction(int d, double lambda, std::size_t n_replicas,
                                                std::uint64_t max_steps,
                                                std::uint64_t master_seed, unsigned threads = 0,
                                                std::uint64_t row = 0) {
  if (n_replicas < 1) throw std::invalid_argument("n_replicas must be >= 1");
  const double p = p_up(d, lambda);
  std::vector<char> died(n_replicas, 0);
  parallel_for(n_replicas, threads, [&](std::size_t r) {
    died[r] = simulate_chain_p(p, max_steps, derive_seed(master_seed, kBranchTag, row, r))
                  .extinct();
  });
  ChainEstimate est;
  est.n = n_replicas;
  for (char c : died) est.extinct += c ? 1 : 0;
  est.censored = est.n - est.extinct;
  const double nn = static_cast<double>(est.n);
  est.extinction_fraction = static_cast<double>(est.extinct) / nn;
  est.wilson_95 = wilson_interval(est.extinct, est.n);
  est.std_error = std::sqrt(est.extinction_fraction * (1.0 - est.extinction_fraction) / nn);
  return est;
}

/// Empirical statistics of the clan along the all-ones branch in full
/// engine runs, for comparison with the embedded chain.
struct BranchCrossCheck {
  std::uint64_t runs = 0;
  std::uint64_t branch_extinct = 0;  // clan hit zero before the run was censored
  std::uint64_t undecided = 0;
  std::uint64_t up_moves = 0;
  std::uint64_t down_moves = 0;
  double empirical_p = 0.0;
  double analytic_p = 0.0;
  double empirical_extinction = 0.0;
  double analytic_extinction = 0.0;
};

inline BranchCrossCheck engine_branch_crosscheck(const ModelParams& params, const StopRule& stop,
                                                 std::size_t n_runs, std::uint64_t master_seed) {
  params.validate();
  stop.validate();
  BranchCrossCheck out;
  out.runs = n_runs;
  const double horizon = stop.max_time.value_or(std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < n_runs; ++r) {
    Rng rng = make_rng(derive_seed(master_seed, "branch_crosscheck", 0, r));
    ProcessState state = initial_state(params, rng);
    std::vector<char> on_branch{1};
    std::uint64_t clan = 1;
    std::uint64_t head_type = 0;
    std::uint64_t events = 0;
    bool decided = false;
    while (!state.empty()) {
      const auto ev = step(state, params.lambda, rng, horizon);
      if (!ev) break;
      ++events;
      if (const auto* b = std::get_if<BirthEvent>(&ev->what)) {
        const bool child_on = on_branch[b->parent] && state.particle(b->child).slot == 1;
        on_branch.push_back(child_on ? 1 : 0);
        if (child_on) {
          ++clan;
          ++out.up_moves;
        }
      } else {
        const auto& k = std::get<KillEvent>(ev->what);
        if (k.type == head_type) {
          --clan;
          ++head_type;
          ++out.down_moves;
        }
      }
      if (clan == 0) {
        ++out.branch_extinct;
        decided = true;
        break;
      }
      if ((stop.max_live_particles && state.live_count() >= *stop.max_live_particles) ||
          (stop.max_events && events >= *stop.max_events))
        break;
    }
    if (!decided) ++out.undecided;
  }
  const std::uint64_t moves = out.up_moves + out.down_moves;
  out.empirical_p = moves ? static_cast<double>(out.up_moves) / static_cast<double>(moves) : 0.0;
  out.analytic_p = p_up(params.d, params.lambda);
  out.empirical_extinction =
      n_runs ? static_cast<double>(out.branch_extinct) / static_cast<double>(n_runs) : 0.0;
  out.analytic_extinction = extinction_prob_branch(params.d, params.lambda);
  return out;
}

}  // namespace massext
