#include "sdde/engine.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "sdde/model.hpp"
#include "sdde/randomness.hpp"

namespace {

using sdde::engine::build_event_grid;
using sdde::engine::GridSpec;
using sdde::engine::integrate_coupled;
using sdde::engine::integrate_frozen;
using sdde::engine::integrate_path;
using sdde::engine::integrate_tower;
using sdde::engine::PathRecord;
using sdde::engine::realize_noise;
using sdde::model::AffineDrift;
using sdde::model::CoefficientSet;
using sdde::model::JumpForm;
using sdde::model::LinearDiffusion;
using sdde::model::LinearJump;
using sdde::model::MarkProfile;
using sdde::model::MarkScaledJump;
using sdde::model::Segment;
using sdde::randomness::JumpEvent;
using sdde::randomness::MarkSpace;
using sdde::randomness::NoiseRealization;
using sdde::randomness::RngPolicy;

// Noise with a prescribed jump pattern and a flat Brownian skeleton, for
// closed-form checks on pure-jump systems.
NoiseRealization still_noise(const GridSpec& grid, std::vector<JumpEvent> events) {
  const auto nodes = build_event_grid(grid, events);
  NoiseRealization noise;
  noise.horizon = grid.horizon;
  for (const auto& node : nodes) noise.skeleton_times.push_back(node.time);
  noise.skeleton_values.assign(nodes.size(), 0.0);
  noise.jump_events = std::move(events);
  return noise;
}

sdde::model::SddeProblem make_simple(CoefficientSet coeffs, double initial, double tau,
                                     double horizon, JumpForm form) {
  return sdde::model::make_problem(std::move(coeffs),
                                   std::make_shared<Segment>(Segment::constant(tau, initial)),
                                   tau, horizon, form);
}

TEST(GridTest, UniformLatticeLandsOnHorizon) {
  const GridSpec grid(1.0, 4, 2.0);
  const auto nodes = build_event_grid(grid, {});
  ASSERT_EQ(nodes.size(), 9u);
  EXPECT_DOUBLE_EQ(nodes.front().time, 0.0);
  EXPECT_DOUBLE_EQ(nodes[4].time, 1.0);
  EXPECT_DOUBLE_EQ(nodes.back().time, 2.0);
  EXPECT_EQ(nodes.back().uniform_index, 8);
  for (const auto& node : nodes) EXPECT_FALSE(node.is_jump);
}

TEST(GridTest, OffLatticeHorizonGetsTerminator) {
  const GridSpec grid(1.0, 4, 1.1);
  const auto nodes = build_event_grid(grid, {});
  ASSERT_EQ(nodes.size(), 6u);  // 0, .25, .5, .75, 1.0, 1.1
  EXPECT_DOUBLE_EQ(nodes.back().time, 1.1);
  EXPECT_EQ(nodes.back().uniform_index, -1);
}

TEST(GridTest, JumpsMergeAndLatticeHitsFlagInPlace) {
  const GridSpec grid(1.0, 4, 2.0);
  const auto nodes = build_event_grid(grid, {{0.3, 1.0}, {0.5, 2.0}});
  ASSERT_EQ(nodes.size(), 10u);  // one inserted node; 0.5 flags the lattice node
  EXPECT_DOUBLE_EQ(nodes[2].time, 0.3);
  EXPECT_TRUE(nodes[2].is_jump);
  EXPECT_EQ(nodes[2].uniform_index, -1);
  EXPECT_DOUBLE_EQ(nodes[3].time, 0.5);
  EXPECT_TRUE(nodes[3].is_jump);
  EXPECT_EQ(nodes[3].uniform_index, 2);
  EXPECT_DOUBLE_EQ(nodes[3].mark, 2.0);
}

TEST(GridTest, RejectsJumpsOutsideHorizon) {
  const GridSpec grid(1.0, 4, 2.0);
  EXPECT_THROW(build_event_grid(grid, {{2.5, 1.0}}), std::invalid_argument);
  EXPECT_THROW(build_event_grid(grid, {{0.0, 1.0}}), std::invalid_argument);
}

TEST(GridTest, ValidatesSpec) {
  EXPECT_THROW(GridSpec(0.0, 4, 1.0), std::invalid_argument);
  EXPECT_THROW(GridSpec(1.0, 0, 1.0), std::invalid_argument);
  EXPECT_THROW(GridSpec(1.0, 4, -1.0), std::invalid_argument);
}

// Drift equal to the delayed state integrates a step initial segment exactly
// when breakpoints sit on the lattice; pins down right-continuous lookups and
// the index mapping one delay back.
TEST(IntegrateTest, DelayedDriftReproducesPiecewiseLinearSolution) {
  CoefficientSet coeffs;
  coeffs.drift = [](double, double y, double) { return y; };
  coeffs.diffusion = sdde::model::zero_diffusion();
  coeffs.jump = sdde::model::zero_jump();
  auto segment = std::make_shared<Segment>(Segment(1.0, {-1.0, -0.5}, {1.0, 3.0}));
  const auto problem =
      sdde::model::make_problem(coeffs, segment, 1.0, 2.0, JumpForm::kPure);

  const GridSpec grid(1.0, 4, 2.0);
  const auto record = integrate_path(problem, still_noise(grid, {}), grid);

  // X(t) = xi(0) + int_0^t xi(s - 1) ds on [0, 1]: starts at 3 with slope 1,
  // then slope 3 from t = 0.5.
  EXPECT_DOUBLE_EQ(record.value_at(0.0), 3.0);
  EXPECT_DOUBLE_EQ(record.value_at(0.25), 3.25);
  EXPECT_DOUBLE_EQ(record.value_at(0.5), 3.5);
  EXPECT_DOUBLE_EQ(record.value_at(0.75), 4.25);
  EXPECT_DOUBLE_EQ(record.value_at(1.0), 5.0);
  // Beyond tau the delayed channel reads the path itself: slope X(t - 1).
  EXPECT_DOUBLE_EQ(record.value_at(1.25), 5.0 + 0.25 * 3.0);
  EXPECT_DOUBLE_EQ(record.value_at(1.5), 5.75 + 0.25 * 3.25);
}

// Two jumps one delay apart: the delayed argument of the second jump must be
// the left limit at the first jump time, not the post-jump value.
TEST(IntegrateTest, JumpDelayUsesLeftLimit) {
  CoefficientSet coeffs;
  coeffs.drift = sdde::model::zero_drift();
  coeffs.diffusion = sdde::model::zero_diffusion();
  coeffs.jump = LinearJump{0.0, 1.0, 0.0}.fn();  // gamma = delayed left value
  coeffs.mark_space = MarkSpace::degenerate(1.0, 1.0);
  const auto problem = make_simple(coeffs, 1.0, 1.0, 2.0, JumpForm::kPure);

  const GridSpec grid(1.0, 4, 2.0);
  const auto record = integrate_path(problem, still_noise(grid, {{0.2, 1.0}, {1.2, 1.0}}), grid);

  EXPECT_DOUBLE_EQ(record.value_at(0.2), 2.0);   // 1 + xi(-0.8) = 2
  EXPECT_DOUBLE_EQ(record.left_value_at(0.2), 1.0);
  EXPECT_DOUBLE_EQ(record.value_at(1.2), 3.0);   // 2 + X(0.2-) = 2 + 1
  EXPECT_DOUBLE_EQ(record.value_at(2.0), 3.0);
}

// Compensated linear jump dynamics admit the closed form
// X(t) = c (1 + g0 N(t) - g0 rate t) on [0, tau]; node values must match it
// to rounding accumulation.
TEST(IntegrateTest, CompensatedJumpMatchesClosedFormOnFirstDelay) {
  CoefficientSet coeffs;
  coeffs.drift = sdde::model::zero_drift();
  coeffs.diffusion = sdde::model::zero_diffusion();
  coeffs.jump = MarkScaledJump{MarkProfile{0.3, 0.0}, 0.0, 1.0, 0.0}.fn();  // 0.3 * y
  coeffs.mark_space = MarkSpace::degenerate(1.0, 1.0);
  const double c = -1.0;
  const auto problem = make_simple(coeffs, c, 1.0, 2.0, JumpForm::kCompensated);

  const GridSpec grid(1.0, 2, 2.0);
  const auto record = integrate_path(problem, still_noise(grid, {{0.2, 1.0}, {0.7, 1.0}}), grid);

  const auto closed_form = [&](double t, int jumps_so_far) {
    return c * (1.0 + 0.3 * jumps_so_far - 0.3 * t);
  };
  EXPECT_NEAR(record.value_at(0.5), -1.15, 1e-13);
  EXPECT_NEAR(record.value_at(0.5), closed_form(0.5, 1), 1e-13);
  EXPECT_NEAR(record.value_at(0.2), closed_form(0.2, 1), 1e-13);
  EXPECT_NEAR(record.left_value_at(0.2), closed_form(0.2, 0), 1e-13);
  EXPECT_NEAR(record.value_at(1.0), closed_form(1.0, 2), 1e-13);
}

// Rewriting a compensated problem as pure-jump is an identity on paths, not
// an approximation: both integrations must agree bitwise.
TEST(IntegrateTest, CompensatedAndConvertedPathsAreBitwiseEqual) {
  CoefficientSet coeffs;
  coeffs.drift = AffineDrift{-0.5, 0.3, 0.0}.fn();
  coeffs.diffusion = LinearDiffusion{0.2, 0.0}.fn();
  coeffs.jump = MarkScaledJump{MarkProfile{0.5, 0.0}, -0.25, 0.15, 0.0}.fn();
  coeffs.mark_space = MarkSpace::degenerate(1.0, 1.0);
  const auto problem = make_simple(coeffs, 0.5, 1.0, 2.0, JumpForm::kCompensated);
  const auto converted = sdde::model::compensated_to_pure(problem);

  const GridSpec grid(1.0, 16, 2.0);
  const RngPolicy policy{314159};
  for (std::uint64_t path = 0; path < 25; ++path) {
    const auto noise = realize_noise(policy, path, coeffs.mark_space, grid);
    const auto a = integrate_path(problem, noise, grid);
    const auto b = integrate_path(converted, noise, grid);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(a.values_pre()[i], b.values_pre()[i]) << "node " << i;
      ASSERT_EQ(a.values_post()[i], b.values_post()[i]) << "node " << i;
    }
  }
}

TEST(IntegrateTest, BlowupRaisesWithTimestamp) {
  CoefficientSet coeffs;
  coeffs.drift = [](double x, double, double) { return 1e9 * x; };
  coeffs.diffusion = sdde::model::zero_diffusion();
  coeffs.jump = sdde::model::zero_jump();
  const auto problem = make_simple(coeffs, 1.0, 1.0, 2.0, JumpForm::kPure);
  const GridSpec grid(1.0, 2, 2.0);
  try {
    integrate_path(problem, still_noise(grid, {}), grid);
    FAIL() << "expected blowup";
  } catch (const sdde::PathBlowupError& e) {
    EXPECT_GT(e.time(), 0.0);
    EXPECT_LE(e.time(), 2.0);
  }
}

TEST(IntegrateTest, MismatchedNoiseIsRejected) {
  CoefficientSet coeffs;
  coeffs.drift = sdde::model::zero_drift();
  coeffs.diffusion = sdde::model::zero_diffusion();
  coeffs.jump = sdde::model::zero_jump();
  const auto problem = make_simple(coeffs, 1.0, 1.0, 2.0, JumpForm::kPure);

  const GridSpec coarse(1.0, 4, 2.0);
  const GridSpec fine(1.0, 8, 2.0);
  const auto noise_coarse = realize_noise(RngPolicy{1}, 0, coeffs.mark_space, coarse);
  // A finer state grid cannot be driven by a coarser skeleton.
  EXPECT_THROW(integrate_path(problem, noise_coarse, fine), std::invalid_argument);
}

// Euler against geometric Brownian motion: reusing one fine skeleton at
// power-of-two coarsenings, the strong error at the horizon shrinks with dt.
TEST(IntegrateTest, RefinementSharesNoiseAndReducesError) {
  CoefficientSet coeffs;
  coeffs.drift = [](double x, double, double) { return 0.05 * x; };
  coeffs.diffusion = [](double x, double) { return 0.4 * x; };
  coeffs.jump = sdde::model::zero_jump();
  const auto problem = make_simple(coeffs, 1.0, 1.0, 1.0, JumpForm::kPure);

  const GridSpec fine(1.0, 128, 1.0);
  const GridSpec mid(1.0, 64, 1.0);
  const GridSpec coarse(1.0, 32, 1.0);
  const RngPolicy policy{271828};

  double sq_err_coarse = 0.0;
  double sq_err_fine = 0.0;
  const int n = 400;
  for (int path = 0; path < n; ++path) {
    const auto noise = realize_noise(policy, path, coeffs.mark_space, fine);
    const double w_T = noise.skeleton_values.back();
    const double exact = std::exp((0.05 - 0.5 * 0.4 * 0.4) * 1.0 + 0.4 * w_T);
    const double at_coarse = integrate_path(problem, noise, coarse).value_at(1.0);
    const double at_mid = integrate_path(problem, noise, mid).value_at(1.0);
    const double at_fine = integrate_path(problem, noise, fine).value_at(1.0);
    sq_err_coarse += (at_coarse - exact) * (at_coarse - exact);
    sq_err_fine += (at_fine - exact) * (at_fine - exact);
    (void)at_mid;
  }
  const double ratio = std::sqrt(sq_err_coarse / n) / std::sqrt(sq_err_fine / n);
  EXPECT_GT(ratio, 1.2);
  EXPECT_LT(ratio, 4.5);
}

TEST(IntegrateTest, CoupledMatchesSeparateRuns) {
  CoefficientSet upper_coeffs;
  upper_coeffs.drift = AffineDrift{-0.5, 0.4, 0.6}.fn();
  upper_coeffs.diffusion = LinearDiffusion{0.2, 0.0}.fn();
  upper_coeffs.jump = LinearJump{-0.3, 0.25, 0.0}.fn();
  upper_coeffs.mark_space = MarkSpace::degenerate(1.0, 1.0);
  CoefficientSet lower_coeffs = upper_coeffs;
  lower_coeffs.drift = AffineDrift{-0.5, 0.4, 0.1}.fn();

  const auto upper = make_simple(upper_coeffs, 1.0, 1.0, 2.0, JumpForm::kPure);
  const auto lower = make_simple(lower_coeffs, 0.5, 1.0, 2.0, JumpForm::kPure);
  const auto pair = sdde::model::make_comparison_pair(upper, lower, true);

  const GridSpec grid(1.0, 8, 2.0);
  const auto noise = realize_noise(RngPolicy{5}, 3, upper_coeffs.mark_space, grid);
  const auto both = integrate_coupled(pair, noise, grid);
  const auto direct_upper = integrate_path(pair.upper, noise, grid);
  const auto direct_lower = integrate_path(pair.lower, noise, grid);
  for (std::size_t i = 0; i < both.upper.size(); ++i) {
    ASSERT_EQ(both.upper.values_post()[i], direct_upper.values_post()[i]);
    ASSERT_EQ(both.lower.values_post()[i], direct_lower.values_post()[i]);
  }
}

// Freezing the delayed channel to the path's own completed record is a fixed
// point of the iteration map.
TEST(IntegrateTest, SelfFrozenIntegrationIsAFixedPoint) {
  CoefficientSet coeffs;
  coeffs.drift = AffineDrift{-0.4, 0.3, 0.0}.fn();
  coeffs.diffusion = LinearDiffusion{0.25, 0.1}.fn();
  coeffs.jump = LinearJump{0.0, -0.2, 0.0}.fn();
  coeffs.mark_space = MarkSpace::degenerate(1.0, 1.5);
  const auto problem = make_simple(coeffs, 0.8, 1.0, 3.0, JumpForm::kPure);

  const GridSpec grid(1.0, 8, 3.0);
  const auto noise = realize_noise(RngPolicy{11}, 0, coeffs.mark_space, grid);
  const auto direct = integrate_path(problem, noise, grid);
  const auto frozen = integrate_frozen(problem, direct, noise, grid);
  for (std::size_t i = 0; i < direct.size(); ++i) {
    ASSERT_EQ(frozen.values_post()[i], direct.values_post()[i]) << "node " << i;
  }
}

// The level-n iterate agrees with the directly integrated path one more
// delay window per level: level 4 already matches on [0, tau] exactly.
TEST(IntegrateTest, TowerLevelsConvergeWindowByWindow) {
  CoefficientSet coeffs;
  coeffs.drift = AffineDrift{-0.5, 0.4, 0.1}.fn();
  coeffs.diffusion = LinearDiffusion{0.2, 0.0}.fn();
  coeffs.jump = LinearJump{-0.3, 0.25, 0.0}.fn();
  coeffs.mark_space = MarkSpace::degenerate(1.0, 1.0);
  const auto lower = make_simple(coeffs, 0.5, 1.0, 2.0, JumpForm::kPure);
  auto upper = lower;
  upper.initial_segment = std::make_shared<Segment>(Segment::constant(1.0, 1.0));
  upper.coefficients.drift = AffineDrift{-0.5, 0.4, 0.6}.fn();

  const GridSpec grid(1.0, 8, 2.0);
  const auto noise = realize_noise(RngPolicy{23}, 1, coeffs.mark_space, grid);
  const auto x1 = integrate_path(upper, noise, grid);
  const auto x2 = integrate_path(lower, noise, grid);
  const auto levels = integrate_tower(lower, x1, 5, noise, grid);
  ASSERT_EQ(levels.size(), 3u);  // levels 3, 4, 5

  const auto& x4 = levels[1];
  bool differs_beyond_tau = false;
  for (std::size_t i = 0; i < x2.size(); ++i) {
    if (x2.times()[i] <= 1.0) {
      ASSERT_EQ(x4.values_post()[i], x2.values_post()[i]) << "node " << i;
    } else {
      differs_beyond_tau |= x4.values_post()[i] != x2.values_post()[i];
    }
  }
  EXPECT_TRUE(differs_beyond_tau);

  EXPECT_THROW(integrate_tower(lower, x1, 2, noise, grid), std::invalid_argument);
}

TEST(PathRecordTest, EvaluationAndBoundsBehave)
{
  CoefficientSet coeffs;
  coeffs.drift = sdde::model::zero_drift();
  coeffs.diffusion = sdde::model::zero_diffusion();
  coeffs.jump = LinearJump{0.0, 0.0, 1.0}.fn();  // unit jumps
  coeffs.mark_space = MarkSpace::degenerate(1.0, 1.0);
  const auto problem = make_simple(coeffs, 0.0, 1.0, 2.0, JumpForm::kPure);
  const GridSpec grid(1.0, 2, 2.0);
  const auto record = integrate_path(problem, still_noise(grid, {{0.75, 1.0}}), grid);

  EXPECT_DOUBLE_EQ(record.value_at(-0.5), 0.0);
  EXPECT_DOUBLE_EQ(record.value_at(0.5), 0.0);
  EXPECT_DOUBLE_EQ(record.value_at(0.75), 1.0);
  EXPECT_DOUBLE_EQ(record.value_at(0.8), 1.0);
  EXPECT_DOUBLE_EQ(record.left_value_at(0.75), 0.0);
  EXPECT_DOUBLE_EQ(record.left_value_at(0.8), 1.0);
  EXPECT_DOUBLE_EQ(record.value_at(2.0), 1.0);
  EXPECT_THROW(record.value_at(2.1), std::out_of_range);
  EXPECT_THROW(record.value_at(-1.5), std::out_of_range);
}

TEST(PathRecordTest, CsvRoundTripsAtFullPrecision) {
  CoefficientSet coeffs;
  coeffs.drift = AffineDrift{-0.3, 0.2, 0.05}.fn();
  coeffs.diffusion = LinearDiffusion{0.3, 0.0}.fn();
  coeffs.jump = LinearJump{0.1, 0.0, 0.0}.fn();
  coeffs.mark_space = MarkSpace::degenerate(1.0, 1.0);
  const auto problem = make_simple(coeffs, 1.0, 1.0, 2.0, JumpForm::kPure);
  const GridSpec grid(1.0, 4, 2.0);
  const auto noise = realize_noise(RngPolicy{99}, 7, coeffs.mark_space, grid);
  const auto record = integrate_path(problem, noise, grid);

  std::ostringstream out;
  sdde::engine::write_path_csv(record, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "time,value_pre,value_post,jump");
  for (std::size_t i = 0; i < record.size(); ++i) {
    std::string line;
    ASSERT_TRUE(static_cast<bool>(std::getline(in, line)));
    double t = 0.0;
    double pre = 0.0;
    double post = 0.0;
    int jump = 0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lg,%lg,%lg,%d", &t, &pre, &post, &jump), 4);
    ASSERT_EQ(t, record.times()[i]);
    ASSERT_EQ(pre, record.values_pre()[i]);
    ASSERT_EQ(post, record.values_post()[i]);
    ASSERT_EQ(jump, record.jump_flags()[i] ? 1 : 0);
  }
}

TEST(NoiseTest, SkeletonCoversEventGridAndJumpsAreGridFree) {
  const GridSpec grid(1.0, 8, 2.0);
  const auto space = MarkSpace::degenerate(1.0, 2.0);
  const auto noise = realize_noise(RngPolicy{13}, 5, space, grid);
  const auto nodes = build_event_grid(grid, noise.jump_events);
  ASSERT_EQ(noise.skeleton_times.size(), nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    ASSERT_EQ(noise.skeleton_times[i], nodes[i].time);
  }
  EXPECT_DOUBLE_EQ(noise.skeleton_values.front(), 0.0);

  // Same path index re-realized on a finer grid keeps the same jump events.
  const GridSpec finer(1.0, 32, 2.0);
  const auto noise_finer = realize_noise(RngPolicy{13}, 5, space, finer);
  ASSERT_EQ(noise_finer.jump_events.size(), noise.jump_events.size());
  for (std::size_t i = 0; i < noise.jump_events.size(); ++i) {
    ASSERT_EQ(noise_finer.jump_events[i].time, noise.jump_events[i].time);
    ASSERT_EQ(noise_finer.jump_events[i].mark, noise.jump_events[i].mark);
  }
}

}  // namespace
