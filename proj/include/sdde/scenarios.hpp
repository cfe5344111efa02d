#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdde/comparison.hpp"
#include "sdde/engine.hpp"
#include "sdde/model.hpp"
#include "sdde/parallel.hpp"
#include "sdde/randomness.hpp"

namespace sdde::scenarios {

enum class ScenarioId {
  kEx2_3,
  kEx2_4,
  kEx2_5,
  kEx3_2,
  kAffineTheorem,
  kLemmaPureJump,
};

inline std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::kEx2_3: return "ex2_3";
    case ScenarioId::kEx2_4: return "ex2_4";
    case ScenarioId::kEx2_5: return "ex2_5";
    case ScenarioId::kEx3_2: return "ex3_2";
    case ScenarioId::kAffineTheorem: return "affine_theorem";
    case ScenarioId::kLemmaPureJump: return "lemma_pure_jump";
  }
  return "unknown";
}

inline std::vector<std::string> scenario_names() {
  return {"ex2_3", "ex2_4", "ex2_5", "ex3_2", "affine_theorem", "lemma_pure_jump"};
}

inline std::optional<ScenarioId> parse_scenario_id(std::string_view name) {
  if (name == "ex2_3") return ScenarioId::kEx2_3;
  if (name == "ex2_4") return ScenarioId::kEx2_4;
  if (name == "ex2_5") return ScenarioId::kEx2_5;
  if (name == "ex3_2") return ScenarioId::kEx3_2;
  if (name == "affine_theorem") return ScenarioId::kAffineTheorem;
  if (name == "lemma_pure_jump") return ScenarioId::kLemmaPureJump;
  return std::nullopt;
}

namespace detail {

inline model::SegmentPtr constant_segment(double tau, double value) {
  return std::make_shared<model::Segment>(model::Segment::constant(tau, value));
}

inline void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

inline std::uint64_t count_jumps_until(const std::vector<randomness::JumpEvent>& events,
                                       double t) {
  std::uint64_t n = 0;
  for (const auto& e : events) {
    if (e.time <= t) ++n; else break;
  }
  return n;
}

}  // namespace detail

// --- Linear compensated jumps, both levels started below zero --------------
//
// dX = g0(u) X((t - tau)-) dN~ with X = c < 0 on [-tau, 0] against the null
// solution started at zero. On [0, tau] the delayed state is the constant c,
// which gives the closed form
//   X(t) = c (1 + sum_{t_i <= t} g0(u_i) - t int g0 dlambda).
// The factor in parentheses stays positive when tau int g0 dlambda < 1, so
// the started-below path stays strictly negative while the null path stays
// at zero; ordering holds despite the effective drift decreasing in the
// delayed state.
struct Ex2_3Params {
  double c = -1.0;
  double tau = 1.0;
  double horizon = 2.0;
  model::MarkProfile profile{0.3, 0.0};
  randomness::MarkSpace mark_space = randomness::MarkSpace::degenerate(1.0, 1.0);
};

struct Ex2_3Scenario {
  model::ComparisonPair pair;
  Ex2_3Params params;
  double jump_rate = 0.0;   // int g0(u) lambda(du)
  double lipschitz = 0.0;
  double claim_hi = 0.0;    // the closed form covers [0, claim_hi]
  bool diffusive = false;

  double oracle_lower(const randomness::NoiseRealization& noise, double t) const {
    if (!(t >= 0.0 && t <= params.tau + 1e-12)) {
      throw std::out_of_range("closed form only covers the first delay window");
    }
    double jump_sum = 0.0;
    for (const auto& e : noise.jump_events) {
      if (e.time <= t) jump_sum += params.profile(e.mark);
    }
    return params.c * (1.0 + jump_sum - t * jump_rate);
  }
};

inline Ex2_3Scenario make_ex2_3(const Ex2_3Params& params = {}) {
  detail::require(std::isfinite(params.c) && params.c < 0.0,
                  "initial level c must be negative");
  detail::require(params.tau > 0.0 && params.horizon > 0.0,
                  "delay and horizon must be positive");
  for (const double u : params.mark_space.probe_marks()) {
    detail::require(params.profile(u) > 0.0,
                    "jump profile must be positive across the mark support");
  }
  const double rate = params.mark_space.integrate([&](double u) { return params.profile(u); });
  detail::require(rate > 0.0, "jump profile must have positive expected mass");
  detail::require(params.tau * rate < 1.0,
                  "delay times expected jump scale must stay below one");

  model::CoefficientSet coeffs;
  coeffs.drift = model::zero_drift();
  coeffs.diffusion = model::zero_diffusion();
  coeffs.jump = model::MarkScaledJump{params.profile, 0.0, 1.0, 0.0}.fn();
  coeffs.mark_space = params.mark_space;

  auto upper = model::make_problem(coeffs, detail::constant_segment(params.tau, 0.0), params.tau,
                                   params.horizon, model::JumpForm::kCompensated);
  auto lower = model::make_problem(coeffs, detail::constant_segment(params.tau, params.c),
                                   params.tau, params.horizon, model::JumpForm::kCompensated);

  Ex2_3Scenario scenario{
      model::make_comparison_pair(std::move(upper), std::move(lower), true), params, rate, 0.0,
      params.tau, false};
  scenario.lipschitz = params.mark_space.integrate(
      [&](double u) { return params.profile(u) * params.profile(u); });
  return scenario;
}

// --- Delayed diffusion outside the admissible class ------------------------
//
// dX = X(t - tau) dB - X((t - tau)-) dN with X = c < 0 on [-tau, 0]. The
// diffusion reads the delayed state, which the comparison framework must
// refuse. On [0, tau] the solution is the explicit c (1 + B(t) - N(t)), so
// the path signs flip with positive probability even though the companion
// started at zero stays at zero.
struct Ex2_4Params {
  double c = -1.0;
  double tau = 1.0;
  double horizon = 2.0;
  double lambda = 1.0;
};

struct Ex2_4Scenario {
  engine::GeneralCoefficients coefficients;  // shared by both systems
  model::SegmentPtr xi_upper;                // constant zero
  model::SegmentPtr xi_lower;                // constant c
  randomness::MarkSpace mark_space;
  Ex2_4Params params;
  double lipschitz = 0.0;
  double claim_hi = 0.0;
  bool diffusive = true;
  std::string structural_reason;

  double oracle_lower(const randomness::NoiseRealization& noise, double t) const {
    if (!(t >= 0.0 && t <= params.tau + 1e-12)) {
      throw std::out_of_range("closed form only covers the first delay window");
    }
    const auto it = std::lower_bound(noise.skeleton_times.begin(), noise.skeleton_times.end(), t);
    if (it == noise.skeleton_times.end() || *it != t) {
      throw std::invalid_argument("oracle time must be a skeleton node");
    }
    const double w = noise.skeleton_values[it - noise.skeleton_times.begin()];
    const double n = static_cast<double>(detail::count_jumps_until(noise.jump_events, t));
    return params.c * (1.0 + w - n);
  }
};

inline Ex2_4Scenario make_ex2_4(const Ex2_4Params& params = {}) {
  detail::require(std::isfinite(params.c) && params.c < 0.0,
                  "initial level c must be negative");
  detail::require(params.tau > 0.0 && params.horizon > 0.0,
                  "delay and horizon must be positive");
  detail::require(params.lambda > 0.0, "jump intensity must be positive");

  engine::GeneralCoefficients coeffs;
  coeffs.drift = model::zero_drift();
  coeffs.diffusion = [](double, double y, double) { return y; };
  coeffs.jump = [](double, double y, double, double) { return -y; };
  return Ex2_4Scenario{
      std::move(coeffs),
      detail::constant_segment(params.tau, 0.0),
      detail::constant_segment(params.tau, params.c),
      randomness::MarkSpace::degenerate(1.0, params.lambda),
      params,
      1.0 + params.lambda,
      params.tau,
      true,
      "diffusion depends on the delayed state, which the comparison theorem does not admit"};
}

// --- Pure-jump flip-flop breaking delay monotonicity ------------------------
//
// dY = -2 Y((t - tau)-) 1{Y < 0} dN from zero (stays at zero) versus
// dX = -2 X((t - tau)-) dN from c < 0, whose first-window closed form is
// c (1 - 2 N(t)): strictly positive as soon as one jump arrives. The only
// broken hypothesis is monotonicity of the jump coefficient in the delayed
// state.
struct Ex2_5Params {
  double c = -1.0;
  double tau = 1.0;
  double horizon = 2.0;
  double lambda = 1.0;
};

struct Ex2_5Scenario {
  model::ComparisonPair pair;
  Ex2_5Params params;
  double lipschitz = 0.0;
  double claim_hi = 0.0;
  bool diffusive = false;

  double exact_positive_probability(double t) const {
    return 1.0 - std::exp(-params.lambda * t);
  }

  double oracle_lower(const randomness::NoiseRealization& noise, double t) const {
    if (!(t >= 0.0 && t <= params.tau + 1e-12)) {
      throw std::out_of_range("closed form only covers the first delay window");
    }
    const double n = static_cast<double>(detail::count_jumps_until(noise.jump_events, t));
    return params.c * (1.0 - 2.0 * n);
  }
};

inline Ex2_5Scenario make_ex2_5(const Ex2_5Params& params = {}) {
  detail::require(std::isfinite(params.c) && params.c < 0.0,
                  "initial level c must be negative");
  detail::require(params.tau > 0.0 && params.horizon > 0.0,
                  "delay and horizon must be positive");
  detail::require(params.lambda > 0.0, "jump intensity must be positive");

  const auto space = randomness::MarkSpace::degenerate(1.0, params.lambda);
  model::CoefficientSet upper_coeffs;
  upper_coeffs.drift = model::zero_drift();
  upper_coeffs.diffusion = model::zero_diffusion();
  upper_coeffs.jump = model::IndicatorGatedJump{-2.0}.fn();
  upper_coeffs.mark_space = space;
  model::CoefficientSet lower_coeffs = upper_coeffs;
  lower_coeffs.jump = model::LinearJump{0.0, -2.0, 0.0}.fn();

  auto upper = model::make_problem(upper_coeffs, detail::constant_segment(params.tau, 0.0),
                                   params.tau, params.horizon, model::JumpForm::kPure);
  auto lower = model::make_problem(lower_coeffs, detail::constant_segment(params.tau, params.c),
                                   params.tau, params.horizon, model::JumpForm::kPure);

  Ex2_5Scenario scenario{model::make_comparison_pair(std::move(upper), std::move(lower), false),
                         params, 4.0 * params.lambda, params.tau, false};
  return scenario;
}

// --- Compensated jumps proportional to the lower drift ----------------------
//
// gamma(x, y, t, u) = rho(u) f2(x, y, t) with rho positive and of expected
// mass below one. The effective compensated drift is (1 - int rho dlambda)
// f2, so monotonicity of f2 in the delayed state carries over and the
// comparison theorem applies.
struct Ex3_2Params {
  double a = -0.5;
  double b = 0.3;
  double c0 = 0.0;
  double delta = 0.4;   // drift gap f1 - f2
  double sigma = 0.2;
  model::MarkProfile rho{0.5, 0.0};
  double xi_upper = 0.5;
  double xi_lower = 0.0;
  double tau = 1.0;
  double horizon = 2.0;
  randomness::MarkSpace mark_space = randomness::MarkSpace::degenerate(1.0, 1.0);
};

struct Ex3_2Scenario {
  model::ComparisonPair pair;
  Ex3_2Params params;
  double rho_mass = 0.0;  // int rho dlambda
  double lipschitz = 0.0;
  double claim_hi = 0.0;
  bool diffusive = true;
};

inline Ex3_2Scenario make_ex3_2(const Ex3_2Params& params = {}) {
  detail::require(params.tau > 0.0 && params.horizon > 0.0,
                  "delay and horizon must be positive");
  detail::require(params.b >= 0.0, "drift must be nondecreasing in the delayed state: b >= 0");
  detail::require(params.delta >= 0.0, "drift gap must be nonnegative: delta >= 0");
  detail::require(params.xi_upper >= params.xi_lower,
                  "upper initial level must dominate the lower one");
  double rho_min = std::numeric_limits<double>::infinity();
  for (const double u : params.mark_space.probe_marks()) {
    const double r = params.rho(u);
    detail::require(r > 0.0, "jump profile must be positive across the mark support");
    rho_min = std::min(rho_min, r);
    detail::require(1.0 + r * params.a >= 0.0,
                    "post-jump map must stay monotone: rho(u) * a >= -1");
  }
  const double rho_mass = params.mark_space.integrate([&](double u) { return params.rho(u); });
  detail::require(rho_mass < 1.0, "expected jump profile mass must stay below one");

  model::CoefficientSet coeffs;
  coeffs.drift = model::AffineDrift{params.a, params.b, params.c0}.fn();
  coeffs.diffusion = model::LinearDiffusion{params.sigma, 0.0}.fn();
  coeffs.jump = model::MarkScaledJump{params.rho, params.a, params.b, params.c0}.fn();
  coeffs.mark_space = params.mark_space;
  model::CoefficientSet upper_coeffs = coeffs;
  upper_coeffs.drift = model::AffineDrift{params.a, params.b, params.c0 + params.delta}.fn();

  auto upper = model::make_problem(upper_coeffs,
                                   detail::constant_segment(params.tau, params.xi_upper),
                                   params.tau, params.horizon, model::JumpForm::kCompensated);
  auto lower = model::make_problem(coeffs, detail::constant_segment(params.tau, params.xi_lower),
                                   params.tau, params.horizon, model::JumpForm::kCompensated);

  Ex3_2Scenario scenario{model::make_comparison_pair(std::move(upper), std::move(lower), true),
                         params, rho_mass, 0.0, params.horizon, params.sigma != 0.0};
  const double affine_sq = params.a * params.a + params.b * params.b;
  const double rho_sq =
      params.mark_space.integrate([&](double u) { return params.rho(u) * params.rho(u); });
  scenario.lipschitz = affine_sq * (1.0 + rho_sq) + params.sigma * params.sigma;
  return scenario;
}

// --- Affine pair satisfying every delay-comparison hypothesis ---------------
struct AffineTheoremParams {
  double a = -0.5;
  double b = 0.4;
  double c0 = 0.1;
  double delta = 0.5;   // drift gap f1 - f2
  double sigma = 0.2;
  double kappa = -0.3;  // jump state coefficient
  double mu = 0.25;     // jump delayed-state coefficient
  double jump_c = 0.0;
  double xi_upper = 1.0;
  double xi_lower = 0.5;
  double tau = 1.0;
  double horizon = 2.0;
  randomness::MarkSpace mark_space = randomness::MarkSpace::degenerate(1.0, 1.0);
};

struct AffineTheoremScenario {
  model::ComparisonPair pair;
  AffineTheoremParams params;
  double lipschitz = 0.0;
  double claim_hi = 0.0;
  bool diffusive = true;
};

inline AffineTheoremScenario make_affine_theorem(const AffineTheoremParams& params = {}) {
  detail::require(params.tau > 0.0 && params.horizon > 0.0,
                  "delay and horizon must be positive");
  detail::require(params.b >= 0.0, "drift must be nondecreasing in the delayed state: b >= 0");
  detail::require(params.mu >= 0.0,
                  "jump coefficient must be nondecreasing in the delayed state: mu >= 0");
  detail::require(params.kappa >= -1.0,
                  "post-jump map must be nondecreasing in the state: kappa >= -1");
  detail::require(params.delta >= 0.0, "drift gap must be nonnegative: delta >= 0");
  detail::require(params.xi_upper >= params.xi_lower,
                  "upper initial level must dominate the lower one");

  model::CoefficientSet coeffs;
  coeffs.drift = model::AffineDrift{params.a, params.b, params.c0}.fn();
  coeffs.diffusion = model::LinearDiffusion{params.sigma, 0.0}.fn();
  coeffs.jump = model::LinearJump{params.kappa, params.mu, params.jump_c}.fn();
  coeffs.mark_space = params.mark_space;
  model::CoefficientSet upper_coeffs = coeffs;
  upper_coeffs.drift = model::AffineDrift{params.a, params.b, params.c0 + params.delta}.fn();

  auto upper = model::make_problem(upper_coeffs,
                                   detail::constant_segment(params.tau, params.xi_upper),
                                   params.tau, params.horizon, model::JumpForm::kPure);
  auto lower = model::make_problem(coeffs, detail::constant_segment(params.tau, params.xi_lower),
                                   params.tau, params.horizon, model::JumpForm::kPure);

  AffineTheoremScenario scenario{
      model::make_comparison_pair(std::move(upper), std::move(lower), true), params, 0.0,
      params.horizon, params.sigma != 0.0};
  const double mass = params.mark_space.total_mass();
  scenario.lipschitz = params.a * params.a + params.b * params.b +
                       mass * (params.kappa * params.kappa + params.mu * params.mu) +
                       params.sigma * params.sigma;
  detail::require(scenario.lipschitz > 0.0, "coefficients cannot all vanish");
  return scenario;
}

// --- Delay-free pair with distinct jump coefficients -------------------------
//
// Both jump coefficients ignore the delayed state, so this exercises the
// plain (non-delay) comparison hypotheses: dominated drift and jumps plus a
// monotone post-jump map on the dominating side.
struct LemmaPureJumpParams {
  double a = -0.5;
  double c0 = 0.0;
  double delta = 0.5;  // drift gap
  double sigma = 0.2;
  double kappa = -0.4;
  double eta = 0.2;    // jump gap gamma1 - gamma2
  double x_upper = 1.0;
  double x_lower = 0.5;
  double tau = 1.0;    // inert; the lattice still needs a delay scale
  double horizon = 2.0;
  randomness::MarkSpace mark_space = randomness::MarkSpace::degenerate(1.0, 1.0);
};

struct LemmaPureJumpScenario {
  model::ComparisonPair pair;
  LemmaPureJumpParams params;
  double lipschitz = 0.0;
  double claim_hi = 0.0;
  bool diffusive = true;
};

inline LemmaPureJumpScenario make_lemma_pure_jump(const LemmaPureJumpParams& params = {}) {
  detail::require(params.tau > 0.0 && params.horizon > 0.0,
                  "delay and horizon must be positive");
  detail::require(params.delta >= 0.0, "drift gap must be nonnegative: delta >= 0");
  detail::require(params.eta >= 0.0, "jump gap must be nonnegative: eta >= 0");
  detail::require(params.kappa >= -1.0,
                  "post-jump map must be nondecreasing in the state: kappa >= -1");
  detail::require(params.x_upper >= params.x_lower,
                  "upper initial level must dominate the lower one");

  model::CoefficientSet lower_coeffs;
  lower_coeffs.drift = model::AffineDrift{params.a, 0.0, params.c0}.fn();
  lower_coeffs.diffusion = model::LinearDiffusion{params.sigma, 0.0}.fn();
  lower_coeffs.jump = model::LinearJump{params.kappa, 0.0, 0.0}.fn();
  lower_coeffs.mark_space = params.mark_space;
  model::CoefficientSet upper_coeffs = lower_coeffs;
  upper_coeffs.drift = model::AffineDrift{params.a, 0.0, params.c0 + params.delta}.fn();
  upper_coeffs.jump = model::LinearJump{params.kappa, 0.0, params.eta}.fn();

  auto upper = model::make_problem(upper_coeffs,
                                   detail::constant_segment(params.tau, params.x_upper),
                                   params.tau, params.horizon, model::JumpForm::kPure);
  auto lower = model::make_problem(lower_coeffs,
                                   detail::constant_segment(params.tau, params.x_lower),
                                   params.tau, params.horizon, model::JumpForm::kPure);

  LemmaPureJumpScenario scenario{
      model::make_comparison_pair(std::move(upper), std::move(lower), false), params, 0.0,
      params.horizon, params.sigma != 0.0};
  const double mass = params.mark_space.total_mass();
  scenario.lipschitz = params.a * params.a + mass * params.kappa * params.kappa +
                       params.sigma * params.sigma;
  detail::require(scenario.lipschitz > 0.0, "coefficients cannot all vanish");
  return scenario;
}

// --- Monte Carlo metrics -----------------------------------------------------

struct Estimate {
  double value = 0.0;
  double stderr_mean = 0.0;
  std::size_t n_paths = 0;
};

namespace detail {

inline Estimate indicator_estimate(std::size_t hits, std::size_t n) {
  Estimate e;
  e.n_paths = n;
  e.value = static_cast<double>(hits) / static_cast<double>(n);
  e.stderr_mean = std::sqrt(std::max(0.0, e.value * (1.0 - e.value) / static_cast<double>(n)));
  return e;
}

}  // namespace detail

// P(X(t) > 0) for the started-below path of the flip-flop scenario. t must
// be a lattice time of the grid.
inline Estimate ex2_5_positive_probability(const Ex2_5Scenario& scenario, double t,
                                           std::size_t n_paths, const engine::GridSpec& grid,
                                           const randomness::RngPolicy& policy, int threads = 1) {
  comparison::require_grid_matches(scenario.pair, grid);
  if (n_paths == 0) throw std::invalid_argument("estimate needs at least one path");
  const auto& space = scenario.pair.lower.coefficients.mark_space;
  const std::size_t n_chunks = sdde::chunk_count(n_paths);
  std::vector<std::size_t> hits(n_chunks, 0);
  parallel_for(n_chunks, resolve_thread_count(threads), [&](std::size_t chunk) {
    auto [begin, end] = sdde::chunk_bounds(chunk, n_paths);
    for (std::size_t path = begin; path < end; ++path) {
      const auto noise = engine::realize_noise(policy, path, space, grid);
      const auto record = engine::integrate_path(scenario.pair.lower, noise, grid);
      if (record.value_at(t) > 0.0) ++hits[chunk];
    }
  });
  std::size_t total = 0;
  for (const auto h : hits) total += h;
  return detail::indicator_estimate(total, n_paths);
}

struct Ex2_3OracleReport {
  double max_abs_error = 0.0;
  bool lower_stays_negative = true;
  bool upper_stays_zero = true;
  std::size_t n_paths = 0;
};

// Deviation of the integrated started-below path from the closed form at
// every grid node of the first delay window, plus the two sign claims.
inline Ex2_3OracleReport ex2_3_oracle_deviation(const Ex2_3Scenario& scenario,
                                                std::size_t n_paths,
                                                const engine::GridSpec& grid,
                                                const randomness::RngPolicy& policy) {
  comparison::require_grid_matches(scenario.pair, grid);
  const auto& space = scenario.pair.lower.coefficients.mark_space;
  Ex2_3OracleReport report;
  report.n_paths = n_paths;
  for (std::size_t path = 0; path < n_paths; ++path) {
    const auto noise = engine::realize_noise(policy, path, space, grid);
    const auto both = engine::integrate_coupled(scenario.pair, noise, grid);
    for (std::size_t i = 0; i < both.lower.size(); ++i) {
      const double t = both.lower.times()[i];
      if (t <= scenario.claim_hi) {
        const double err = std::abs(both.lower.values_post()[i] - scenario.oracle_lower(noise, t));
        report.max_abs_error = std::max(report.max_abs_error, err);
        report.lower_stays_negative &= both.lower.values_post()[i] < 0.0;
      }
      report.upper_stays_zero &= both.upper.values_post()[i] == 0.0;
    }
  }
  return report;
}

struct Ex2_5OracleReport {
  double max_abs_error = 0.0;
  std::size_t n_paths = 0;
};

inline Ex2_5OracleReport ex2_5_oracle_deviation(const Ex2_5Scenario& scenario,
                                                std::size_t n_paths,
                                                const engine::GridSpec& grid,
                                                const randomness::RngPolicy& policy) {
  comparison::require_grid_matches(scenario.pair, grid);
  const auto& space = scenario.pair.lower.coefficients.mark_space;
  Ex2_5OracleReport report;
  report.n_paths = n_paths;
  for (std::size_t path = 0; path < n_paths; ++path) {
    const auto noise = engine::realize_noise(policy, path, space, grid);
    const auto record = engine::integrate_path(scenario.pair.lower, noise, grid);
    for (std::size_t i = 0; i < record.size(); ++i) {
      const double t = record.times()[i];
      if (t > scenario.claim_hi) break;
      const double err = std::abs(record.values_post()[i] - scenario.oracle_lower(noise, t));
      report.max_abs_error = std::max(report.max_abs_error, err);
    }
  }
  return report;
}

struct Ex2_4Report {
  Estimate any_positive;       // P(exists grid node t <= tau with X(t) > 0)
  Estimate brownian_below;     // P(min over grid nodes t <= tau of B(t) < -1)
  double continuous_reference = 0.0;  // P(min over [0, tau] of B < -1), exact
  double oracle_max_error = 0.0;
  bool upper_stays_zero = true;
  std::size_t n_paths = 0;
};

// Sign-flip frequency for the delayed-diffusion system, with the reflection
// bound P(min B < -1) = 2 Phi(-1) as the continuous-time reference the grid
// estimate must approach from below.
inline Ex2_4Report ex2_4_positivity(const Ex2_4Scenario& scenario, std::size_t n_paths,
                                    const engine::GridSpec& grid,
                                    const randomness::RngPolicy& policy, int threads = 1) {
  if (grid.tau != scenario.params.tau || grid.horizon != scenario.params.horizon) {
    throw std::invalid_argument("grid must carry the scenario's delay and horizon");
  }
  if (n_paths == 0) throw std::invalid_argument("estimate needs at least one path");

  struct Accum {
    std::size_t positive = 0;
    std::size_t brownian = 0;
    double max_err = 0.0;
    bool upper_zero = true;
  };
  const std::size_t n_chunks = sdde::chunk_count(n_paths);
  std::vector<Accum> accums(n_chunks);
  parallel_for(n_chunks, resolve_thread_count(threads), [&](std::size_t chunk) {
    auto [begin, end] = sdde::chunk_bounds(chunk, n_paths);
    Accum& acc = accums[chunk];
    for (std::size_t path = begin; path < end; ++path) {
      const auto noise = engine::realize_noise(policy, path, scenario.mark_space, grid);
      const auto lower =
          engine::integrate_general(scenario.coefficients, scenario.xi_lower, noise, grid);
      const auto upper =
          engine::integrate_general(scenario.coefficients, scenario.xi_upper, noise, grid);

      bool positive = false;
      std::uint64_t jumps_seen = 0;
      for (std::size_t i = 0; i < lower.size(); ++i) {
        const double t = lower.times()[i];
        if (t <= scenario.params.tau) {
          positive |= lower.values_post()[i] > 0.0 || lower.values_pre()[i] > 0.0;
          if (lower.jump_flags()[i]) ++jumps_seen;
          const double w = noise.skeleton_values[i];
          const double oracle =
              scenario.params.c * (1.0 + w - static_cast<double>(jumps_seen));
          acc.max_err = std::max(acc.max_err, std::abs(lower.values_post()[i] - oracle));
        }
        acc.upper_zero &= upper.values_post()[i] == 0.0;
      }
      if (positive) ++acc.positive;

      bool below = false;
      for (std::size_t i = 0; i < noise.skeleton_times.size(); ++i) {
        if (noise.skeleton_times[i] > scenario.params.tau) break;
        below |= noise.skeleton_values[i] < -1.0;
      }
      if (below) ++acc.brownian;
    }
  });

  Ex2_4Report report;
  report.n_paths = n_paths;
  std::size_t positive = 0;
  std::size_t brownian = 0;
  for (const auto& acc : accums) {
    positive += acc.positive;
    brownian += acc.brownian;
    report.oracle_max_error = std::max(report.oracle_max_error, acc.max_err);
    report.upper_stays_zero &= acc.upper_zero;
  }
  report.any_positive = detail::indicator_estimate(positive, n_paths);
  report.brownian_below = detail::indicator_estimate(brownian, n_paths);
  report.continuous_reference = std::erfc(1.0 / std::sqrt(2.0));  // 2 Phi(-1)
  return report;
}

}  // namespace sdde::scenarios
