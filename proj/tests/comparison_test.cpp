#include "sdde/comparison.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sdde/engine.hpp"
#include "sdde/randomness.hpp"
#include "sdde/scenarios.hpp"

namespace {

using sdde::comparison::compute_beta;
using sdde::comparison::IterationConfig;
using sdde::comparison::ordering_statistics;
using sdde::comparison::picard_tower_report;
using sdde::comparison::TimeWindow;
using sdde::comparison::weighted_norm_sq;

TEST(WeightNormTest, DiscountRateMatchesHandComputedCases) {
  // c = sqrt(L) (1 + sqrt(mass)), rate = 5 (L + c).
  EXPECT_DOUBLE_EQ(compute_beta(1.0, 0.0).beta, 10.0);
  EXPECT_DOUBLE_EQ(compute_beta(1.0, 1.0).beta, 15.0);
  EXPECT_DOUBLE_EQ(compute_beta(4.0, 0.0).beta, 30.0);
}

TEST(WeightNormTest, ContractionFactorStaysBelowOneHalf) {
  sdde::randomness::Stream stream(7);
  for (int i = 0; i < 200; ++i) {
    const double lips = 1e-3 + 10.0 * stream.next_uniform();
    const double mass = 5.0 * stream.next_uniform();
    const auto result = compute_beta(lips, mass);
    const double c = std::sqrt(lips) * (1.0 + std::sqrt(mass));
    EXPECT_DOUBLE_EQ(result.contraction_bound, (lips + c) / (3.0 * lips + 2.0 * c));
    EXPECT_LE(result.contraction_bound, 0.5);
    EXPECT_GT(result.contraction_bound, 0.0);
  }
  EXPECT_THROW(compute_beta(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(compute_beta(1.0, -1.0), std::invalid_argument);
}

TEST(WeightNormTest, WeightedNormOfUnitFunctionMatchesClosedForm) {
  // int_0^1 exp(-beta t) dt = (1 - exp(-beta)) / beta.
  const double beta = 15.0;
  const std::size_t n = 4000;
  std::vector<double> times(n + 1);
  std::vector<double> values(n + 1, 1.0);
  for (std::size_t i = 0; i <= n; ++i) times[i] = static_cast<double>(i) / n;
  const double exact = (1.0 - std::exp(-beta)) / beta;
  EXPECT_NEAR(weighted_norm_sq(times, values, beta), exact, 1e-6);
}

TEST(WeightNormTest, WeightedNormRejectsMalformedInput) {
  EXPECT_THROW(weighted_norm_sq({0.0, 1.0}, {1.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(weighted_norm_sq({0.0}, {1.0}, 1.0), std::invalid_argument);
}

sdde::engine::GridSpec grid_for(const sdde::model::ComparisonPair& pair, std::size_t steps) {
  return sdde::engine::GridSpec(pair.upper.tau, steps, pair.upper.horizon);
}

TEST(OrderingTest, IdenticalSystemsNeverViolateOrdering) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  auto pair = sdde::model::make_comparison_pair(scenario.pair.lower, scenario.pair.lower, true);
  const sdde::randomness::RngPolicy policy{321};
  const auto report =
      ordering_statistics(pair, 64, grid_for(pair, 16), policy, 0.0, TimeWindow{}, 1);
  EXPECT_EQ(report.violation_prob, 0.0);
  EXPECT_EQ(report.violation_prob_raw, 0.0);
  EXPECT_EQ(report.max_violation, 0.0);
  for (const auto& point : report.positive_part_curve) {
    EXPECT_EQ(point.mean, 0.0);
    EXPECT_EQ(point.stderr_mean, 0.0);
  }
}

TEST(OrderingTest, DominatedAffinePairStaysOrdered) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  const sdde::randomness::RngPolicy policy{5150};
  const auto report = ordering_statistics(scenario.pair, 512, grid_for(scenario.pair, 64),
                                          policy, 1e-9, TimeWindow{}, 1);
  EXPECT_LE(report.violation_prob, 0.01);
  EXPECT_EQ(report.n_paths, 512u);
  ASSERT_FALSE(report.positive_part_curve.empty());
  // Curve nodes are the lattice times inside the window.
  EXPECT_EQ(report.positive_part_curve.front().time, 0.0);
  EXPECT_EQ(report.positive_part_curve.back().time, scenario.pair.upper.horizon);
  for (const auto& point : report.positive_part_curve) {
    EXPECT_LE(point.mean, 3.0 * point.stderr_mean + 1e-12);
  }
}

TEST(OrderingTest, ReversedPairIsFlaggedOnEveryPath) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  auto reversed = sdde::model::make_comparison_pair(scenario.pair.lower, scenario.pair.upper, true);
  const sdde::randomness::RngPolicy policy{5150};
  const auto report =
      ordering_statistics(reversed, 256, grid_for(reversed, 32), policy, 0.0, TimeWindow{}, 1);
  // The gap starts at xi_lower - xi_upper = -0.5 on every path.
  EXPECT_EQ(report.violation_prob, 1.0);
  EXPECT_GE(report.max_violation, 0.5);
  EXPECT_GT(report.positive_part_curve.front().mean, 0.4);
}

TEST(OrderingTest, EpsilonSeparatesRawAndToleratedCounts) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  auto reversed = sdde::model::make_comparison_pair(scenario.pair.lower, scenario.pair.upper, true);
  const sdde::randomness::RngPolicy policy{11};
  const auto loose =
      ordering_statistics(reversed, 64, grid_for(reversed, 16), policy, 10.0, TimeWindow{}, 1);
  EXPECT_EQ(loose.violation_prob, 0.0);
  EXPECT_EQ(loose.violation_prob_raw, 1.0);
  EXPECT_EQ(loose.epsilon, 10.0);
}

TEST(OrderingTest, WindowRestrictsTheCurve) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  const sdde::randomness::RngPolicy policy{77};
  TimeWindow window;
  window.lo = 0.5;
  window.hi = 1.0;
  const auto report = ordering_statistics(scenario.pair, 32, grid_for(scenario.pair, 8),
                                          policy, 0.0, window, 1);
  ASSERT_FALSE(report.positive_part_curve.empty());
  EXPECT_GE(report.positive_part_curve.front().time, 0.5);
  EXPECT_LE(report.positive_part_curve.back().time, 1.0);
  EXPECT_EQ(report.window.lo, 0.5);
  EXPECT_EQ(report.window.hi, 1.0);
}

TEST(OrderingTest, ThreadCountDoesNotChangeTheResult) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  const sdde::randomness::RngPolicy policy{9001};
  const auto grid = grid_for(scenario.pair, 32);
  const auto seq = ordering_statistics(scenario.pair, 2500, grid, policy, 0.0, TimeWindow{}, 1);
  const auto par = ordering_statistics(scenario.pair, 2500, grid, policy, 0.0, TimeWindow{}, 4);
  EXPECT_EQ(seq.violation_prob, par.violation_prob);
  EXPECT_EQ(seq.max_violation, par.max_violation);
  ASSERT_EQ(seq.positive_part_curve.size(), par.positive_part_curve.size());
  for (std::size_t i = 0; i < seq.positive_part_curve.size(); ++i) {
    EXPECT_EQ(seq.positive_part_curve[i].mean, par.positive_part_curve[i].mean);
    EXPECT_EQ(seq.positive_part_curve[i].stderr_mean, par.positive_part_curve[i].stderr_mean);
  }
}

TEST(OrderingTest, PositivePartCurveMatchesFullStatistics) {
  const auto scenario = sdde::scenarios::make_lemma_pure_jump();
  const sdde::randomness::RngPolicy policy{31};
  const auto grid = grid_for(scenario.pair, 16);
  const auto curve =
      sdde::comparison::positive_part_curve(scenario.pair, 128, grid, policy, TimeWindow{}, 2);
  const auto full = ordering_statistics(scenario.pair, 128, grid, policy, 0.0, TimeWindow{}, 2);
  ASSERT_EQ(curve.size(), full.positive_part_curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    EXPECT_EQ(curve[i].time, full.positive_part_curve[i].time);
    EXPECT_EQ(curve[i].mean, full.positive_part_curve[i].mean);
  }
}

TEST(OrderingTest, InputValidation) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  const sdde::randomness::RngPolicy policy{1};
  const auto grid = grid_for(scenario.pair, 8);
  EXPECT_THROW(ordering_statistics(scenario.pair, 0, grid, policy, 0.0, TimeWindow{}, 1),
               std::invalid_argument);
  EXPECT_THROW(ordering_statistics(scenario.pair, 8, grid, policy, -1.0, TimeWindow{}, 1),
               std::invalid_argument);
  TimeWindow empty;
  empty.lo = 1.5;
  empty.hi = 1.0;
  EXPECT_THROW(ordering_statistics(scenario.pair, 8, grid, policy, 0.0, empty, 1),
               std::invalid_argument);
  sdde::engine::GridSpec wrong(0.5, 8, 2.0);
  EXPECT_THROW(ordering_statistics(scenario.pair, 8, wrong, policy, 0.0, TimeWindow{}, 1),
               std::invalid_argument);
}

TEST(IterationTest, TowerContractsUnderTheWeightedNorm) {
  auto params = sdde::scenarios::AffineTheoremParams{};
  params.horizon = 4.0;
  const auto scenario = sdde::scenarios::make_affine_theorem(params);
  const sdde::randomness::RngPolicy policy{1234};
  IterationConfig config;
  config.max_level = 8;
  config.lipschitz = scenario.lipschitz;
  const auto report = picard_tower_report(scenario.pair, 96, grid_for(scenario.pair, 16),
                                          policy, config, 2);

  EXPECT_EQ(report.max_level, 8);
  ASSERT_EQ(report.levels.size(), 6u);  // levels 3..8
  for (const auto& level : report.levels) {
    EXPECT_EQ(level.chain_violation_fraction, 0.0)
        << "level " << level.level << " breaks the monotone chain";
  }
  // Successive iterates agree on a growing initial window, so the gap norms
  // must vanish once the window covers the horizon: X(n) == X(2) on
  // [0, (n-3) tau] makes r(8) exactly zero for horizon 4 tau.
  ASSERT_EQ(report.norm_ratios.size(), 4u);  // ratios for n = 5..8
  EXPECT_GT(report.norm_ratios[0], 0.0);
  EXPECT_GT(report.norm_ratios[1], 0.0);
  EXPECT_GT(report.norm_ratios[2], 0.0);
  EXPECT_EQ(report.norm_ratios[3], 0.0);
  EXPECT_GT(report.beta, 0.0);
  EXPECT_LE(report.contraction_bound, 0.5);
}

TEST(IterationTest, TowerIsThreadInvariant) {
  auto params = sdde::scenarios::AffineTheoremParams{};
  params.horizon = 4.0;
  const auto scenario = sdde::scenarios::make_affine_theorem(params);
  const sdde::randomness::RngPolicy policy{88};
  IterationConfig config;
  config.max_level = 5;
  config.lipschitz = scenario.lipschitz;
  const auto grid = grid_for(scenario.pair, 8);
  const auto seq = picard_tower_report(scenario.pair, 48, grid, policy, config, 1);
  const auto par = picard_tower_report(scenario.pair, 48, grid, policy, config, 4);
  ASSERT_EQ(seq.iterate_norms.size(), par.iterate_norms.size());
  for (std::size_t i = 0; i < seq.iterate_norms.size(); ++i) {
    EXPECT_EQ(seq.iterate_norms[i], par.iterate_norms[i]);
  }
  for (std::size_t i = 0; i < seq.levels.size(); ++i) {
    EXPECT_EQ(seq.levels[i].sup_gap_to_direct, par.levels[i].sup_gap_to_direct);
  }
}

TEST(IterationTest, ExplicitBetaOverridesTheDerivedRate) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  const sdde::randomness::RngPolicy policy{3};
  IterationConfig config;
  config.max_level = 4;
  config.beta = 2.5;
  const auto report = picard_tower_report(scenario.pair, 8, grid_for(scenario.pair, 8),
                                          policy, config, 1);
  EXPECT_EQ(report.beta, 2.5);
  EXPECT_EQ(report.epsilon, config.epsilon);
  IterationConfig bad;
  bad.max_level = 3;
  EXPECT_THROW(picard_tower_report(scenario.pair, 8, grid_for(scenario.pair, 8), policy, bad, 1),
               std::invalid_argument);
}

}  // namespace
