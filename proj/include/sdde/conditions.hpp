#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdde/model.hpp"
#include "sdde/randomness.hpp"

namespace sdde::conditions {

// Slack granted to every sampled inequality; violations smaller than this are
// treated as rounding noise.
inline constexpr double kInequalityTolerance = 1e-12;

enum class ConditionKey {
  kInitialOrdering,
  kDriftDomination,
  kJumpDomination,
  kStateJumpMonotone,
  kDelayMonotoneDrift,
  kDelayMonotoneJump,
  kCompensatedDelayMonotone,
};

inline std::string to_string(ConditionKey key) {
  switch (key) {
    case ConditionKey::kInitialOrdering: return "InitialOrdering";
    case ConditionKey::kDriftDomination: return "DriftDomination";
    case ConditionKey::kJumpDomination: return "JumpDomination";
    case ConditionKey::kStateJumpMonotone: return "StateJumpMonotone";
    case ConditionKey::kDelayMonotoneDrift: return "DelayMonotoneDrift";
    case ConditionKey::kDelayMonotoneJump: return "DelayMonotoneJump";
    case ConditionKey::kCompensatedDelayMonotone: return "CompensatedDelayMonotone";
  }
  return "Unknown";
}

// Violation location. Monotonicity checks store the ordered pair of delayed
// (or state) arguments in (y, y2); domination checks leave y2 unused.
struct Witness {
  double x = 0.0;
  double y = 0.0;
  double y2 = 0.0;
  double t = 0.0;
  double u = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Sampled verdict: PASS means every probed point satisfied the inequality
// within tolerance, never a proof. margin is the smallest sampled lhs - rhs.
struct ConditionResult {
  bool passed = true;
  double margin = std::numeric_limits<double>::infinity();
  Witness witness;
  std::size_t samples = 0;

  void record(double lhs, double rhs, const Witness& w) {
    ++samples;
    const double m = lhs - rhs;
    if (m < margin) {
      margin = m;
      witness = w;
      witness.lhs = lhs;
      witness.rhs = rhs;
    }
    if (m < -kInequalityTolerance) passed = false;
  }
};

inline std::string verdict_string(const ConditionResult& r) {
  return r.passed ? "PASS_SAMPLED" : "FAIL";
}

// Probe geometry shared by all checks on one pair.
struct DomainSample {
  double x_lo = -10.0;
  double x_hi = 10.0;
  double y_lo = -10.0;
  double y_hi = 10.0;
  std::vector<double> times;
  std::vector<double> marks;
  int draws = 160;
  std::uint64_t seed = 0;
};

inline DomainSample make_domain_sample(const model::ComparisonPair& pair, int draws = 160,
                                       std::uint64_t seed = 0) {
  if (draws < 1) throw std::invalid_argument("domain sample needs at least one draw");
  DomainSample sample;
  sample.draws = draws;
  sample.seed = seed;
  constexpr int kTimeNodes = 9;
  for (int i = 0; i < kTimeNodes; ++i) {
    sample.times.push_back(pair.upper.horizon * static_cast<double>(i) / (kTimeNodes - 1));
  }
  sample.marks = pair.upper.coefficients.mark_space.probe_marks();
  return sample;
}

namespace detail {

inline randomness::Stream probe_stream(const DomainSample& sample, std::uint64_t salt) {
  return randomness::RngPolicy{randomness::mix64(sample.seed + salt)}.derive(
      salt, randomness::Channel::kProbe);
}

inline double draw_in(randomness::Stream& s, double lo, double hi) {
  return lo + (hi - lo) * s.next_uniform();
}

}  // namespace detail

// f1 >= f2 pointwise.
inline ConditionResult check_drift_domination(const model::DriftFn& f1, const model::DriftFn& f2,
                                              const DomainSample& d) {
  auto stream = detail::probe_stream(d, 1);
  ConditionResult result;
  for (int i = 0; i < d.draws; ++i) {
    const double x = detail::draw_in(stream, d.x_lo, d.x_hi);
    const double y = detail::draw_in(stream, d.y_lo, d.y_hi);
    for (const double t : d.times) {
      result.record(f1(x, y, t), f2(x, y, t), Witness{x, y, 0.0, t, 0.0});
    }
  }
  return result;
}

// gamma1 >= gamma2 pointwise across the mark support.
inline ConditionResult check_jump_domination(const model::JumpFn& g1, const model::JumpFn& g2,
                                             const DomainSample& d) {
  auto stream = detail::probe_stream(d, 2);
  ConditionResult result;
  for (int i = 0; i < d.draws; ++i) {
    const double x = detail::draw_in(stream, d.x_lo, d.x_hi);
    const double y = detail::draw_in(stream, d.y_lo, d.y_hi);
    for (const double t : d.times) {
      for (const double u : d.marks) {
        result.record(g1(x, y, t, u), g2(x, y, t, u), Witness{x, y, 0.0, t, u});
      }
    }
  }
  return result;
}

// x + gamma(x, y, t, u) nondecreasing in x: the post-jump state must not
// cross under a lower starting state.
inline ConditionResult check_state_jump_monotone(const model::JumpFn& jump,
                                                 const DomainSample& d) {
  auto stream = detail::probe_stream(d, 3);
  ConditionResult result;
  for (int i = 0; i < d.draws; ++i) {
    double x1 = detail::draw_in(stream, d.x_lo, d.x_hi);
    double x2 = detail::draw_in(stream, d.x_lo, d.x_hi);
    if (x2 < x1) std::swap(x1, x2);
    const double y = detail::draw_in(stream, d.y_lo, d.y_hi);
    for (const double t : d.times) {
      for (const double u : d.marks) {
        result.record(x2 + jump(x2, y, t, u), x1 + jump(x1, y, t, u),
                      Witness{x1, y, x2, t, u});
      }
    }
  }
  return result;
}

// f(x, y, t) nondecreasing in the delayed argument y.
inline ConditionResult check_delay_monotone_drift(const model::DriftFn& drift,
                                                  const DomainSample& d) {
  auto stream = detail::probe_stream(d, 4);
  ConditionResult result;
  for (int i = 0; i < d.draws; ++i) {
    const double x = detail::draw_in(stream, d.x_lo, d.x_hi);
    double y1 = detail::draw_in(stream, d.y_lo, d.y_hi);
    double y2 = detail::draw_in(stream, d.y_lo, d.y_hi);
    if (y2 < y1) std::swap(y1, y2);
    for (const double t : d.times) {
      result.record(drift(x, y2, t), drift(x, y1, t), Witness{x, y1, y2, t, 0.0});
    }
  }
  return result;
}

// gamma(x, y, t, u) nondecreasing in the delayed argument y.
inline ConditionResult check_delay_monotone_jump(const model::JumpFn& jump,
                                                 const DomainSample& d) {
  auto stream = detail::probe_stream(d, 5);
  ConditionResult result;
  for (int i = 0; i < d.draws; ++i) {
    const double x = detail::draw_in(stream, d.x_lo, d.x_hi);
    double y1 = detail::draw_in(stream, d.y_lo, d.y_hi);
    double y2 = detail::draw_in(stream, d.y_lo, d.y_hi);
    if (y2 < y1) std::swap(y1, y2);
    for (const double t : d.times) {
      for (const double u : d.marks) {
        result.record(jump(x, y2, t, u), jump(x, y1, t, u), Witness{x, y1, y2, t, u});
      }
    }
  }
  return result;
}

// Compensated form: the effective drift f(x, y, t) - int gamma(x, y, t, u)
// lambda(du) must be nondecreasing in y for the comparison to survive the
// compensator's sign flip.
inline ConditionResult check_compensated_delay_monotone(const model::DriftFn& drift,
                                                        const model::JumpFn& jump,
                                                        const randomness::MarkSpace& space,
                                                        const DomainSample& d) {
  auto stream = detail::probe_stream(d, 6);
  const auto effective = [&](double x, double y, double t) {
    return drift(x, y, t) - model::compensator_integral(jump, space, x, y, t);
  };
  ConditionResult result;
  for (int i = 0; i < d.draws; ++i) {
    const double x = detail::draw_in(stream, d.x_lo, d.x_hi);
    double y1 = detail::draw_in(stream, d.y_lo, d.y_hi);
    double y2 = detail::draw_in(stream, d.y_lo, d.y_hi);
    if (y2 < y1) std::swap(y1, y2);
    for (const double t : d.times) {
      result.record(effective(x, y2, t), effective(x, y1, t), Witness{x, y1, y2, t, 0.0});
    }
  }
  return result;
}

// xi1 >= xi2 on [-tau, 0], probed at breakpoints of both segments, uniform
// draws, and the interval ends; left limits are checked at every probe.
inline ConditionResult check_initial_ordering(const model::Segment& xi1,
                                              const model::Segment& xi2,
                                              const DomainSample& d) {
  if (xi1.tau() != xi2.tau()) {
    throw std::invalid_argument("segments must share the delay to be ordered");
  }
  std::vector<double> probes;
  probes.push_back(-xi1.tau());
  probes.push_back(0.0);
  for (const double b : xi1.breakpoints()) probes.push_back(b);
  for (const double b : xi2.breakpoints()) probes.push_back(b);
  auto stream = detail::probe_stream(d, 7);
  for (int i = 0; i < d.draws; ++i) probes.push_back(-xi1.tau() * stream.next_uniform());

  ConditionResult result;
  for (const double theta : probes) {
    result.record(xi1.value_at(theta), xi2.value_at(theta), Witness{0, 0, 0, theta, 0});
    result.record(xi1.left_value_at(theta), xi2.left_value_at(theta),
                  Witness{0, 0, 0, theta, 0});
  }
  return result;
}

struct ConditionReport {
  std::vector<std::pair<ConditionKey, ConditionResult>> entries;
  bool structural_rejection = false;
  std::string structural_reason;

  bool all_passed() const {
    if (structural_rejection) return false;
    for (const auto& [key, result] : entries) {
      if (!result.passed) return false;
    }
    return true;
  }

  const ConditionResult* find(ConditionKey key) const {
    for (const auto& [k, result] : entries) {
      if (k == key) return &result;
    }
    return nullptr;
  }
};

inline ConditionReport structurally_rejected(std::string reason) {
  ConditionReport report;
  report.structural_rejection = true;
  report.structural_reason = std::move(reason);
  return report;
}

// Runs every hypothesis check that applies to the pair's jump form. The
// delay-monotonicity of the jump coefficient is probed on both coefficients
// when the pair does not share one.
inline ConditionReport evaluate_pair(const model::ComparisonPair& pair, const DomainSample& d) {
  const auto& up = pair.upper.coefficients;
  const auto& low = pair.lower.coefficients;

  ConditionReport report;
  report.entries.emplace_back(
      ConditionKey::kInitialOrdering,
      check_initial_ordering(*pair.upper.initial_segment, *pair.lower.initial_segment, d));
  report.entries.emplace_back(ConditionKey::kDriftDomination,
                              check_drift_domination(up.drift, low.drift, d));
  report.entries.emplace_back(ConditionKey::kJumpDomination,
                              check_jump_domination(up.jump, low.jump, d));
  report.entries.emplace_back(ConditionKey::kStateJumpMonotone,
                              check_state_jump_monotone(up.jump, d));
  report.entries.emplace_back(ConditionKey::kDelayMonotoneDrift,
                              check_delay_monotone_drift(low.drift, d));

  ConditionResult delay_jump = check_delay_monotone_jump(up.jump, d);
  if (!pair.shared_jump) {
    ConditionResult lower_side = check_delay_monotone_jump(low.jump, d);
    delay_jump.samples += lower_side.samples;
    if (lower_side.margin < delay_jump.margin) {
      delay_jump.margin = lower_side.margin;
      delay_jump.witness = lower_side.witness;
    }
    delay_jump.passed = delay_jump.passed && lower_side.passed;
  }
  report.entries.emplace_back(ConditionKey::kDelayMonotoneJump, std::move(delay_jump));

  if (pair.upper.jump_form == model::JumpForm::kCompensated) {
    report.entries.emplace_back(
        ConditionKey::kCompensatedDelayMonotone,
        check_compensated_delay_monotone(low.drift, low.jump, up.mark_space, d));
  }
  return report;
}

}  // namespace sdde::conditions
