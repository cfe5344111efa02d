#include "sdde/conditions.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "sdde/model.hpp"
#include "sdde/scenarios.hpp"

namespace {

using sdde::conditions::ConditionKey;
using sdde::conditions::ConditionReport;
using sdde::conditions::evaluate_pair;
using sdde::conditions::make_domain_sample;

ConditionReport report_for(const sdde::model::ComparisonPair& pair, std::uint64_t seed = 2024) {
  return evaluate_pair(pair, make_domain_sample(pair, 160, seed));
}

void expect_only_failures(const ConditionReport& report,
                          std::initializer_list<ConditionKey> failing) {
  for (const auto& [key, result] : report.entries) {
    const bool should_fail =
        std::find(failing.begin(), failing.end(), key) != failing.end();
    EXPECT_EQ(result.passed, !should_fail) << sdde::conditions::to_string(key);
  }
}

TEST(ConditionsTest, AffinePairSatisfiesEveryHypothesis) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  const auto report = report_for(scenario.pair);
  EXPECT_FALSE(report.structural_rejection);
  EXPECT_TRUE(report.all_passed());
  expect_only_failures(report, {});
  // Pure-jump pair: the compensated-drift key must not appear.
  EXPECT_EQ(report.find(ConditionKey::kCompensatedDelayMonotone), nullptr);
  EXPECT_EQ(report.entries.size(), 6u);
}

TEST(ConditionsTest, SharedLinearJumpHasZeroDominationMargin) {
  const auto scenario = sdde::scenarios::make_affine_theorem();
  const auto report = report_for(scenario.pair);
  const auto* domination = report.find(ConditionKey::kJumpDomination);
  ASSERT_NE(domination, nullptr);
  EXPECT_TRUE(domination->passed);
  EXPECT_EQ(domination->margin, 0.0);
}

TEST(ConditionsTest, IndicatorGateBreaksOnlyDelayMonotonicity) {
  const auto scenario = sdde::scenarios::make_ex2_5();
  const auto report = report_for(scenario.pair);
  EXPECT_FALSE(report.structural_rejection);
  expect_only_failures(report, {ConditionKey::kDelayMonotoneJump});

  const auto* broken = report.find(ConditionKey::kDelayMonotoneJump);
  ASSERT_NE(broken, nullptr);
  EXPECT_LT(broken->margin, -sdde::conditions::kInequalityTolerance);
  // The recorded witness must actually violate the inequality it reports.
  EXPECT_LT(broken->witness.lhs, broken->witness.rhs);
  EXPECT_LE(broken->witness.y, broken->witness.y2);
}

TEST(ConditionsTest, CompensatedScalingBreaksOnlyEffectiveDriftMonotonicity) {
  const auto scenario = sdde::scenarios::make_ex2_3();
  const auto report = report_for(scenario.pair);
  EXPECT_FALSE(report.structural_rejection);
  expect_only_failures(report, {ConditionKey::kCompensatedDelayMonotone});
  EXPECT_EQ(report.entries.size(), 7u);
}

TEST(ConditionsTest, CompensatedProportionalJumpPassesEverything) {
  const auto scenario = sdde::scenarios::make_ex3_2();
  const auto report = report_for(scenario.pair);
  EXPECT_TRUE(report.all_passed());
  EXPECT_NE(report.find(ConditionKey::kCompensatedDelayMonotone), nullptr);
}

TEST(ConditionsTest, DelayFreeJumpGapPassesPlainHypotheses) {
  const auto scenario = sdde::scenarios::make_lemma_pure_jump();
  const auto report = report_for(scenario.pair);
  EXPECT_TRUE(report.all_passed());
  const auto* domination = report.find(ConditionKey::kJumpDomination);
  ASSERT_NE(domination, nullptr);
  // gamma1 - gamma2 = eta everywhere.
  EXPECT_NEAR(domination->margin, scenario.params.eta, 1e-12);
}

TEST(ConditionsTest, InitialOrderingFailureIsDetectedAtTheCrossing) {
  auto params = sdde::scenarios::AffineTheoremParams{};
  params.xi_upper = 1.0;
  params.xi_lower = 1.0;
  auto scenario = sdde::scenarios::make_affine_theorem(params);
  // Rebuild the lower problem with a segment that pokes above the upper one
  // on an interior breakpoint.
  auto crossing = std::make_shared<sdde::model::Segment>(
      1.0, std::vector<double>{-1.0, -0.5}, std::vector<double>{0.5, 1.5});
  auto lower = sdde::model::make_problem(scenario.pair.lower.coefficients, crossing, 1.0,
                                         scenario.pair.lower.horizon,
                                         sdde::model::JumpForm::kPure);
  auto pair = sdde::model::make_comparison_pair(scenario.pair.upper, lower, true);

  const auto report = report_for(pair);
  const auto* ordering = report.find(ConditionKey::kInitialOrdering);
  ASSERT_NE(ordering, nullptr);
  EXPECT_FALSE(ordering->passed);
  EXPECT_NEAR(ordering->margin, -0.5, 1e-12);
  // The witness must sit inside the region where the lower segment pokes up.
  EXPECT_GE(ordering->witness.t, -0.5);
  EXPECT_LE(ordering->witness.t, 0.0);
}

TEST(ConditionsTest, ReportIsDeterministicForAFixedSeed) {
  const auto scenario = sdde::scenarios::make_ex2_5();
  const auto a = report_for(scenario.pair, 99);
  const auto b = report_for(scenario.pair, 99);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].first, b.entries[i].first);
    EXPECT_EQ(a.entries[i].second.passed, b.entries[i].second.passed);
    EXPECT_EQ(a.entries[i].second.margin, b.entries[i].second.margin);
    EXPECT_EQ(a.entries[i].second.witness.t, b.entries[i].second.witness.t);
    EXPECT_EQ(a.entries[i].second.samples, b.entries[i].second.samples);
  }
}

TEST(ConditionsTest, StructuralRejectionShortCircuitsSampling) {
  const auto report = sdde::conditions::structurally_rejected("diffusion reads the delayed state");
  EXPECT_TRUE(report.structural_rejection);
  EXPECT_FALSE(report.all_passed());
  EXPECT_TRUE(report.entries.empty());
  EXPECT_EQ(report.structural_reason, "diffusion reads the delayed state");
}

TEST(ConditionsTest, VerdictStringsAreStable) {
  sdde::conditions::ConditionResult result;
  EXPECT_EQ(sdde::conditions::verdict_string(result), "PASS_SAMPLED");
  result.passed = false;
  EXPECT_EQ(sdde::conditions::verdict_string(result), "FAIL");
}

}  // namespace
