#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdde/randomness.hpp"

namespace sdde::model {

// Cadlag step function on [-tau, 0]; the initial data of a delay problem.
// breakpoints[0] is exactly -tau and values[i] holds on
// [breakpoints[i], breakpoints[i+1]), with the last value extending to 0.
class Segment {
 public:
  Segment(double tau, std::vector<double> breakpoints, std::vector<double> values)
      : tau_(tau), breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (!(std::isfinite(tau_) && tau_ > 0.0)) {
      throw std::invalid_argument("segment delay must be positive");
    }
    if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
      throw std::invalid_argument("segment needs matching breakpoints and values");
    }
    if (breakpoints_.front() != -tau_) {
      throw std::invalid_argument("first breakpoint must be -tau");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      if (!std::isfinite(breakpoints_[i]) || !std::isfinite(values_[i])) {
        throw std::invalid_argument("segment data must be finite");
      }
      if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1])) {
        throw std::invalid_argument("breakpoints must be strictly increasing");
      }
    }
    if (breakpoints_.back() > 0.0) {
      throw std::invalid_argument("breakpoints must lie in [-tau, 0]");
    }
  }

  static Segment constant(double tau, double value) {
    return Segment(tau, {-tau}, {value});
  }

  double tau() const noexcept { return tau_; }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& values() const noexcept { return values_; }

  // Right-continuous evaluation on [-tau, 0].
  double value_at(double theta) const {
    check_domain(theta);
    return values_[segment_index(theta)];
  }

  // Left limit on [-tau, 0]; at -tau there is no history so the first value
  // is returned.
  double left_value_at(double theta) const {
    check_domain(theta);
    const std::size_t idx = segment_index(theta);
    if (idx > 0 && breakpoints_[idx] == theta) return values_[idx - 1];
    return values_[idx];
  }

  friend bool operator==(const Segment& a, const Segment& b) {
    return a.tau_ == b.tau_ && a.breakpoints_ == b.breakpoints_ && a.values_ == b.values_;
  }

 private:
  void check_domain(double theta) const {
    if (!(theta >= -tau_ && theta <= 0.0)) {
      throw std::out_of_range("segment evaluated outside [-tau, 0]");
    }
  }

  // Largest i with breakpoints[i] <= theta.
  std::size_t segment_index(double theta) const {
    std::size_t lo = 0;
    std::size_t hi = breakpoints_.size();
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (breakpoints_[mid] <= theta) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  double tau_;
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

using SegmentPtr = std::shared_ptr<const Segment>;

// Coefficient signatures. x is the current state, y the delayed state,
// t the time, u the jump mark.
using DriftFn = std::function<double(double x, double y, double t)>;
using DiffusionFn = std::function<double(double x, double t)>;
using JumpFn = std::function<double(double x, double y, double t, double u)>;

enum class JumpForm {
  kPure,         // driven by the Poisson random measure itself
  kCompensated,  // driven by the compensated measure
};

inline std::string to_string(JumpForm form) {
  return form == JumpForm::kPure ? "pure" : "compensated";
}

struct CoefficientSet {
  DriftFn drift;
  DiffusionFn diffusion;
  JumpFn jump;
  randomness::MarkSpace mark_space = randomness::MarkSpace::degenerate(0.0, 0.0);
  // Optional user-asserted bound for the squared-difference quotient
  // (|df|^2 + |dg|^2 + int |dgamma|^2) / (|dx|^2 + |dy|^2).
  std::optional<double> lipschitz_bound;
};

struct SddeProblem {
  CoefficientSet coefficients;
  SegmentPtr initial_segment;
  double tau = 0.0;
  double horizon = 0.0;
  JumpForm jump_form = JumpForm::kPure;
};

inline SddeProblem make_problem(CoefficientSet coefficients, SegmentPtr initial_segment,
                                double tau, double horizon, JumpForm form) {
  if (!coefficients.drift || !coefficients.diffusion || !coefficients.jump) {
    throw std::invalid_argument("problem needs drift, diffusion and jump coefficients");
  }
  if (!initial_segment) throw std::invalid_argument("problem needs an initial segment");
  if (!(std::isfinite(tau) && tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (initial_segment->tau() != tau) {
    throw std::invalid_argument("initial segment delay must equal the problem delay");
  }
  if (!(std::isfinite(horizon) && horizon > 0.0)) {
    throw std::invalid_argument("horizon must be positive");
  }
  if (coefficients.lipschitz_bound && !(*coefficients.lipschitz_bound > 0.0)) {
    throw std::invalid_argument("lipschitz bound must be positive when given");
  }
  return SddeProblem{std::move(coefficients), std::move(initial_segment), tau, horizon, form};
}

// Dominating/dominated problem pair on a common delay, horizon, jump form and
// mark space. Comparison claims are about upper versus lower.
struct ComparisonPair {
  SddeProblem upper;
  SddeProblem lower;
  // True when both problems carry the same jump coefficient, the theorem-form
  // hypothesis; lemma-form pairs with distinct jump coefficients set false.
  bool shared_jump = true;
};

inline ComparisonPair make_comparison_pair(SddeProblem upper, SddeProblem lower,
                                           bool shared_jump) {
  if (upper.tau != lower.tau) throw std::invalid_argument("pair members must share tau");
  if (upper.horizon != lower.horizon) {
    throw std::invalid_argument("pair members must share the horizon");
  }
  if (upper.jump_form != lower.jump_form) {
    throw std::invalid_argument("pair members must share the jump form");
  }
  if (!(upper.coefficients.mark_space == lower.coefficients.mark_space)) {
    throw std::invalid_argument("pair members must share the mark space");
  }
  return ComparisonPair{std::move(upper), std::move(lower), shared_jump};
}

// --- Closed coefficient families -------------------------------------------
//
// Families keep their parameters inspectable so problems built from them can
// be serialized, validated symbolically and re-created from configuration.

struct AffineDrift {
  double a = 0.0;  // state coefficient
  double b = 0.0;  // delayed-state coefficient
  double c = 0.0;  // constant

  double operator()(double x, double y, double /*t*/) const { return a * x + b * y + c; }
  DriftFn fn() const { return *this; }
};

struct LinearDiffusion {
  double sigma = 0.0;
  double c = 0.0;

  double operator()(double x, double /*t*/) const { return sigma * x + c; }
  DiffusionFn fn() const {
    return [d = *this](double x, double t) { return d(x, t); };
  }
};

// Affine profile in the mark, p + q * u. q = 0 gives a mark-independent
// profile.
struct MarkProfile {
  double p = 1.0;
  double q = 0.0;

  double operator()(double u) const { return p + q * u; }
};

struct LinearJump {
  double kappa = 0.0;  // state coefficient
  double mu = 0.0;     // delayed-state coefficient
  double c = 0.0;      // constant

  double operator()(double x, double y, double /*t*/, double /*u*/) const {
    return kappa * x + mu * y + c;
  }
  JumpFn fn() const { return *this; }
};

// rho(u) * (alpha x + beta y + c): a mark profile scaling an affine form.
struct MarkScaledJump {
  MarkProfile profile;
  double alpha = 0.0;
  double beta = 0.0;
  double c = 0.0;

  double operator()(double x, double y, double /*t*/, double u) const {
    return profile(u) * (alpha * x + beta * y + c);
  }
  JumpFn fn() const { return *this; }
};

// scale * y when the delayed state is negative, zero otherwise. Deliberately
// not monotone in y; the canonical way to break delay monotonicity.
struct IndicatorGatedJump {
  double scale = 1.0;

  double operator()(double /*x*/, double y, double /*t*/, double /*u*/) const {
    return y < 0.0 ? scale * y : 0.0;
  }
  JumpFn fn() const { return *this; }
};

inline DriftFn zero_drift() {
  return [](double, double, double) { return 0.0; };
}
inline DiffusionFn zero_diffusion() {
  return [](double, double) { return 0.0; };
}
inline JumpFn zero_jump() {
  return [](double, double, double, double) { return 0.0; };
}

// --- Compensator ------------------------------------------------------------

// int gamma(x, y, t, u) lambda(du) over the mark space.
inline double compensator_integral(const JumpFn& jump, const randomness::MarkSpace& space,
                                   double x, double y, double t) {
  return space.integrate([&](double u) { return jump(x, y, t, u); });
}

// Rewrites a compensated-form problem as the pure-jump problem with the
// compensator folded into the drift. Both describe the same process, so
// integrating either produces identical paths.
inline SddeProblem compensated_to_pure(const SddeProblem& problem) {
  if (problem.jump_form != JumpForm::kCompensated) {
    throw std::invalid_argument("problem is already in pure-jump form");
  }
  SddeProblem converted = problem;
  converted.jump_form = JumpForm::kPure;
  converted.coefficients.drift = [drift = problem.coefficients.drift,
                                  jump = problem.coefficients.jump,
                                  space = problem.coefficients.mark_space](double x, double y,
                                                                           double t) {
    return drift(x, y, t) - compensator_integral(jump, space, x, y, t);
  };
  return converted;
}

// --- Sampled validation ------------------------------------------------------

struct ValidationBox {
  double x_lo = -10.0;
  double x_hi = 10.0;
  double y_lo = -10.0;
  double y_hi = 10.0;
};

struct ValidationReport {
  // Largest sampled value of
  //   (|df|^2 + |dg|^2 + int |dgamma|^2 lambda(du)) / (|dx|^2 + |dy|^2).
  double lipschitz_estimate = 0.0;
  // Largest sampled value of (|f|^2 + |g|^2 + int |gamma|^2) / (1 + x^2 + y^2)
  // over the full box, and over the half-extent inner box.
  double growth_ratio = 0.0;
  double growth_ratio_inner = 0.0;
  // Raised when the full-box growth ratio dwarfs the inner-box one, the
  // sampled signature of superlinear growth.
  bool growth_warn = false;
  // Raised when a user-asserted lipschitz bound is exceeded on samples.
  bool lipschitz_warn = false;
  std::size_t samples_used = 0;
};

inline ValidationReport validate_problem(const SddeProblem& problem, std::size_t sample_budget,
                                         const ValidationBox& box = {},
                                         std::uint64_t seed = 0) {
  if (sample_budget < 100) {
    throw std::invalid_argument("validation needs a sample budget of at least 100");
  }
  if (!(box.x_lo < box.x_hi && box.y_lo < box.y_hi)) {
    throw std::invalid_argument("validation box must be nonempty");
  }

  const auto& c = problem.coefficients;
  randomness::Stream probe =
      randomness::RngPolicy{seed}.derive(0, randomness::Channel::kProbe);

  const auto squared_norm = [&](double x, double y, double t) {
    const double f = c.drift(x, y, t);
    const double g = c.diffusion(x, t);
    const double j2 = c.mark_space.integrate([&](double u) {
      const double v = c.jump(x, y, t, u);
      return v * v;
    });
    return f * f + g * g + j2;
  };
  const auto diff_quotient = [&](double x0, double y0, double x1, double y1, double t) {
    const double denom = (x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0);
    if (denom < 1e-300) return 0.0;
    const double df = c.drift(x1, y1, t) - c.drift(x0, y0, t);
    const double dg = c.diffusion(x1, t) - c.diffusion(x0, t);
    const double dj2 = c.mark_space.integrate([&](double u) {
      const double v = c.jump(x1, y1, t, u) - c.jump(x0, y0, t, u);
      return v * v;
    });
    return (df * df + dg * dg + dj2) / denom;
  };

  ValidationReport report;
  const double x_span = box.x_hi - box.x_lo;
  const double y_span = box.y_hi - box.y_lo;
  const double x_mid = 0.5 * (box.x_lo + box.x_hi);
  const double y_mid = 0.5 * (box.y_lo + box.y_hi);

  // Difference quotients are probed along fixed directions from random base
  // points; axis and diagonal directions catch the extreme quotients of
  // affine coefficients exactly.
  static constexpr double kDirections[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  static constexpr double kScales[2] = {1e-3, 0.25};

  std::size_t used = 0;
  while (used < sample_budget) {
    const double x = box.x_lo + x_span * probe.next_uniform();
    const double y = box.y_lo + y_span * probe.next_uniform();
    const double t = problem.horizon * probe.next_uniform();
    ++used;

    const double ratio = squared_norm(x, y, t) / (1.0 + x * x + y * y);
    report.growth_ratio = std::max(report.growth_ratio, ratio);
    const bool inner = std::abs(x - x_mid) <= 0.25 * x_span && std::abs(y - y_mid) <= 0.25 * y_span;
    if (inner) report.growth_ratio_inner = std::max(report.growth_ratio_inner, ratio);

    for (const auto& dir : kDirections) {
      for (const double scale : kScales) {
        const double x1 = x + dir[0] * scale * x_span;
        const double y1 = y + dir[1] * scale * y_span;
        report.lipschitz_estimate =
            std::max(report.lipschitz_estimate, diff_quotient(x, y, x1, y1, t));
      }
    }
  }
  // The inner box is sampled implicitly; make sure it was hit at least once
  // by probing its center directly.
  report.growth_ratio_inner = std::max(
      report.growth_ratio_inner, squared_norm(x_mid, y_mid, 0.0) / (1.0 + x_mid * x_mid + y_mid * y_mid));
  report.samples_used = used;

  report.growth_warn = report.growth_ratio > 2.0 * report.growth_ratio_inner &&
                       report.growth_ratio > 1e-12;
  if (c.lipschitz_bound) {
    const double bound = *c.lipschitz_bound;
    if (report.lipschitz_estimate > bound * (1.0 + 1e-9)) report.lipschitz_warn = true;
    if (report.growth_ratio > bound * (1.0 + 1e-9)) report.growth_warn = true;
  }
  return report;
}

}  // namespace sdde::model
