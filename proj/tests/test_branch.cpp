#include <gtest/gtest.h>

#include <cmath>

#include "massext/branch.hpp"
#include "massext/criticality.hpp"

using namespace massext;

TEST(PUp, HandValues) {
  EXPECT_NEAR(p_up(2, 1.0), 0.375, 1e-15);
  EXPECT_NEAR(p_up(2, 3.0), 21.0 / 32.0, 1e-15);
  EXPECT_EQ(p_up(4, 0.0), 0.0);
}

// The closed form equals the average race probability (1/d) sum_i (lambda/(1+lambda))^i.
TEST(PUp, MatchesGammaRaceSum) {
  for (int d = 1; d <= 12; ++d)
    for (double lambda : {0.1, 0.5, 1.0, 3.0, 8.0}) {
      double sum = 0.0;
      for (int i = 1; i <= d; ++i) sum += std::pow(lambda / (1 + lambda), i);
      EXPECT_NEAR(p_up(d, lambda), sum / d, 1e-14);
    }
}

TEST(PUp, MonteCarloRace) {
  Rng rng = make_rng(31);
  std::exponential_distribution<double> birth{1.0}, kill{1.0};
  const int n = 200'000;
  int wins = 0;
  for (int r = 0; r < n; ++r) {
    const int i = std::uniform_int_distribution<int>{1, 2}(rng);
    double b = 0.0;
    for (int j = 0; j < i; ++j) b += birth(rng);
    wins += b < kill(rng) ? 1 : 0;
  }
  EXPECT_NEAR(wins / double(n), 0.375, 3 * std::sqrt(0.375 * 0.625 / n));
}

TEST(PUp, HalfAtLambdaS) {
  for (int d = 2; d <= 7; ++d) EXPECT_NEAR(p_up(d, solve_lambda_s(d).value), 0.5, 1e-11);
}

TEST(ExtinctionProb, OneUpToLambdaS) {
  for (int d = 1; d <= 6; ++d) {
    const double ls = solve_lambda_s(d).value;
    for (double frac : {0.1, 0.5, 0.9, 0.999}) EXPECT_EQ(extinction_prob_branch(d, frac * ls), 1.0);
  }
}

TEST(ExtinctionProb, GamblersRuinValue) {
  EXPECT_NEAR(extinction_prob_branch(2, 3.0), 11.0 / 21.0, 1e-14);
  const ChainParams cp = chain_params(2, 3.0);
  EXPECT_NEAR(cp.q, 11.0 / 32.0, 1e-15);
}

TEST(ExtinctionProb, SignEquivalenceWithHd) {
  for (int d = 1; d <= 8; ++d) {
    const double ls = solve_lambda_s(d).value;
    for (int i = 1; i <= 80; ++i) {
      const double lambda = 0.1 * i;
      const bool certain = extinction_prob_branch(d, lambda) == 1.0;
      EXPECT_EQ(certain, h_d(d, lambda) >= 0.0) << d << ' ' << lambda;
      EXPECT_EQ(certain, lambda <= ls + 1e-12) << d << ' ' << lambda;
    }
  }
}

TEST(ExtinctionProb, TendsToZeroGrowthForLargeLambda) {
  // p -> 1 as lambda grows, so q/p falls toward 0.
  double prev = 1.0;
  for (double lambda : {5.0, 10.0, 50.0, 500.0}) {
    const double e = extinction_prob_branch(2, lambda);
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(SimulateChain, ZeroUpProbabilityDiesImmediately) {
  const ChainRun run = simulate_chain_p(0.0, 10, 1);
  ASSERT_TRUE(run.extinct());
  EXPECT_EQ(std::get<ChainExtinct>(run.outcome).steps, 1u);
  EXPECT_EQ(simulate_chain(3, 0.0, 10, 1).extinct(), true);
}

TEST(SimulateChain, CensorsAtMaxSteps) {
  const ChainRun run = simulate_chain_p(1.0, 25, 1);
  EXPECT_FALSE(run.extinct());
  EXPECT_EQ(run.steps, 25u);
  EXPECT_EQ(run.max_clan_size, 26u);
  EXPECT_THROW(simulate_chain_p(0.5, 0, 1), std::invalid_argument);
}

TEST(SimulateChain, SubcriticalAlwaysDies) {
  const ChainEstimate est = estimate_branch_extinction(2, 1.0, 100'000, 100'000, 12);
  EXPECT_EQ(est.extinct, est.n);
}

TEST(SimulateChain, GamblersRuinFrequency) {
  const ChainEstimate est = estimate_branch_extinction(2, 3.0, 400'000, 2'000, 13);
  const double target = 11.0 / 21.0;
  EXPECT_NEAR(est.extinction_fraction, target, 3 * std::sqrt(target * (1 - target) / est.n));
}

// Tally moves out of states 1, 5 and 50; p must not depend on the state.
TEST(SimulateChain, TransitionProbabilityIndependentOfState) {
  const double p = p_up(2, 1.8);
  for (std::uint64_t start : {1u, 5u, 50u}) {
    Rng rng = make_rng(derive_seed(4, "chain_state", start, 0));
    const int n = 200'000;
    int ups = 0;
    for (int i = 0; i < n; ++i) ups += chain_step(start, p, rng) > start ? 1 : 0;
    EXPECT_NEAR(ups / double(n), p, 3 * std::sqrt(p * (1 - p) / n)) << "from " << start;
  }
}

TEST(SimulateChain, EmpiricalUpFrequency) {
  const double p = p_up(3, 2.0);
  std::uint64_t ups = 0, steps = 0;
  for (std::uint64_t r = 0; steps < 1'000'000; ++r) {
    const ChainRun run = simulate_chain_p(p, 10'000, derive_seed(5, "ups", 0, r));
    ups += run.up_moves;
    steps += run.steps;
  }
  EXPECT_NEAR(ups / double(steps), p, 4 * std::sqrt(p * (1 - p) / steps));
}

TEST(EngineCrossCheck, ReportsStatistics) {
  const BranchCrossCheck cc =
      engine_branch_crosscheck({2, 1.0}, StopRule{std::nullopt, 2'000, 1'000, 100'000}, 100, 3);
  EXPECT_EQ(cc.runs, 100u);
  EXPECT_EQ(cc.branch_extinct + cc.undecided, 100u);
  EXPECT_GT(cc.down_moves, 0u);
  EXPECT_NEAR(cc.analytic_p, 0.375, 1e-15);
  EXPECT_GE(cc.empirical_p, 0.0);
  EXPECT_LE(cc.empirical_p, 1.0);
}
