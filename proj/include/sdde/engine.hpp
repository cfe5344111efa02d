#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sdde/common.hpp"
#include "sdde/model.hpp"
#include "sdde/randomness.hpp"

namespace sdde::engine {

// Uniform lattice with spacing dt = tau / steps_per_delay. Because the delay
// is an exact multiple of dt, the delayed time of a lattice node is itself a
// lattice node and delayed lookups resolve by index, never by subtracting tau
// in floating point.
struct GridSpec {
  double tau = 0.0;
  int steps_per_delay = 0;
  double horizon = 0.0;

  GridSpec(double tau_, int steps_per_delay_, double horizon_)
      : tau(tau_), steps_per_delay(steps_per_delay_), horizon(horizon_) {
    if (!(std::isfinite(tau) && tau > 0.0)) {
      throw std::invalid_argument("grid delay must be positive");
    }
    if (steps_per_delay < 1) {
      throw std::invalid_argument("steps per delay must be at least 1");
    }
    if (!(std::isfinite(horizon) && horizon > 0.0)) {
      throw std::invalid_argument("grid horizon must be positive");
    }
    if (dt() <= 4e-9 * std::max(1.0, horizon)) {
      throw std::invalid_argument("grid resolution is too fine for the horizon");
    }
  }

  double dt() const { return tau / steps_per_delay; }

  // Single definition of lattice times; every component that needs node k's
  // time must call this so comparisons by value stay exact.
  double uniform_time(std::int64_t k) const {
    return (static_cast<double>(k) * tau) / steps_per_delay;
  }
};

struct EventNode {
  double time = 0.0;
  std::int64_t uniform_index = -1;  // lattice index, -1 for off-lattice nodes
  bool is_jump = false;
  double mark = 0.0;
};

// Merges the uniform lattice with the jump times of one noise realization.
// The final node always sits exactly at the horizon. A jump landing exactly
// on a lattice node flags that node instead of inserting a duplicate.
inline std::vector<EventNode> build_event_grid(const GridSpec& grid,
                                               const std::vector<randomness::JumpEvent>& jumps) {
  const double tol = 1e-9 * std::max(1.0, std::abs(grid.horizon));
  std::vector<EventNode> nodes;
  for (std::int64_t k = 0;; ++k) {
    const double t = grid.uniform_time(k);
    if (t < grid.horizon - tol) {
      nodes.push_back(EventNode{t, k, false, 0.0});
      continue;
    }
    if (t <= grid.horizon + tol) {
      nodes.push_back(EventNode{grid.horizon, k, false, 0.0});
    } else {
      nodes.push_back(EventNode{grid.horizon, -1, false, 0.0});
    }
    break;
  }

  double prev_jump = 0.0;
  for (const auto& event : jumps) {
    if (!(event.time > 0.0 && event.time <= grid.horizon)) {
      throw std::invalid_argument("jump events must lie in (0, horizon]");
    }
    if (event.time <= prev_jump) {
      throw std::invalid_argument("jump events must be strictly increasing in time");
    }
    prev_jump = event.time;
    const auto it = std::lower_bound(
        nodes.begin(), nodes.end(), event.time,
        [](const EventNode& node, double t) { return node.time < t; });
    if (it != nodes.end() && it->time == event.time) {
      it->is_jump = true;
      it->mark = event.mark;
    } else {
      nodes.insert(it, EventNode{event.time, -1, true, event.mark});
    }
  }
  return nodes;
}

// Numerical path on an event grid. value_pre is the state just before any
// jump applied at the node; value_post the cadlag value. Between nodes the
// path is piecewise constant, matching the weak order of the Euler scheme.
class PathRecord {
 public:
  PathRecord(model::SegmentPtr segment, std::vector<double> times, std::vector<double> pre,
             std::vector<double> post, std::vector<unsigned char> jump_flags,
             std::vector<std::int64_t> uniform_indices)
      : segment_(std::move(segment)),
        times_(std::move(times)),
        pre_(std::move(pre)),
        post_(std::move(post)),
        jump_flags_(std::move(jump_flags)),
        uniform_indices_(std::move(uniform_indices)) {
    if (!segment_ || times_.empty() || times_.front() != 0.0 || times_.size() != pre_.size() ||
        times_.size() != post_.size() || times_.size() != jump_flags_.size() ||
        times_.size() != uniform_indices_.size()) {
      throw std::invalid_argument("inconsistent path record arrays");
    }
  }

  double tau() const { return segment_->tau(); }
  double horizon() const { return times_.back(); }
  std::size_t size() const { return times_.size(); }

  const model::Segment& initial_segment() const { return *segment_; }
  const model::SegmentPtr& segment_ptr() const { return segment_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values_pre() const { return pre_; }
  const std::vector<double>& values_post() const { return post_; }
  const std::vector<unsigned char>& jump_flags() const { return jump_flags_; }
  const std::vector<std::int64_t>& uniform_indices() const { return uniform_indices_; }

  // Cadlag evaluation on [-tau, horizon].
  double value_at(double s) const {
    if (s < 0.0) return segment_->value_at(s);
    return post_[node_at_or_before(s)];
  }

  // Left limit. At a node this is the pre-jump state, which for jump-free
  // nodes equals the drift-and-diffusion evolved value entering the node.
  double left_value_at(double s) const {
    if (s <= 0.0) return segment_->left_value_at(s);
    const std::size_t idx = node_at_or_before(s);
    if (times_[idx] == s) return pre_[idx];
    return post_[idx];
  }

 private:
  std::size_t node_at_or_before(double s) const {
    if (s > times_.back()) {
      throw std::out_of_range("path queried beyond its horizon");
    }
    const auto it = std::upper_bound(times_.begin(), times_.end(), s);
    return static_cast<std::size_t>(it - times_.begin()) - 1;
  }

  model::SegmentPtr segment_;
  std::vector<double> times_;
  std::vector<double> pre_;
  std::vector<double> post_;
  std::vector<unsigned char> jump_flags_;
  std::vector<std::int64_t> uniform_indices_;
};

// Fully general coefficient view used by the stepper. Model problems restrict
// the diffusion to g(x, t); systems outside that class (delayed diffusion)
// can be integrated through this entry but are not admissible as comparison
// pair members.
struct GeneralCoefficients {
  model::DriftFn drift;                                      // f(x, y, t)
  std::function<double(double, double, double)> diffusion;   // g(x, y, t)
  model::JumpFn jump;                                        // gamma(x, y, t, u)
};

inline GeneralCoefficients as_general(const model::SddeProblem& problem) {
  const model::SddeProblem* source = &problem;
  model::SddeProblem converted;
  if (problem.jump_form == model::JumpForm::kCompensated) {
    converted = model::compensated_to_pure(problem);
    source = &converted;
  }
  GeneralCoefficients general;
  general.drift = source->coefficients.drift;
  general.diffusion = [g = source->coefficients.diffusion](double x, double /*y*/, double t) {
    return g(x, t);
  };
  general.jump = source->coefficients.jump;
  return general;
}

namespace detail {

// Where a node's delayed value lives. Lattice nodes with index >= steps map
// to the lattice node exactly one delay earlier; everything else lands either
// in the initial segment or between two grid nodes.
struct DelayRef {
  enum class Kind { kSegmentValue, kSegmentLeft, kNodePost, kNodePre };
  Kind kind = Kind::kSegmentValue;
  double theta = 0.0;     // segment coordinate, for the segment kinds
  std::size_t node = 0;   // grid position, for the node kinds
};

struct DelayMap {
  std::vector<DelayRef> current;  // X(t - tau)
  std::vector<DelayRef> left;     // X((t - tau)-)
};

inline DelayMap build_delay_map(const std::vector<EventNode>& nodes, const GridSpec& grid) {
  std::int64_t max_uniform = -1;
  for (const auto& node : nodes) max_uniform = std::max(max_uniform, node.uniform_index);
  std::vector<std::size_t> uniform_pos(static_cast<std::size_t>(max_uniform + 1), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].uniform_index >= 0) {
      uniform_pos[static_cast<std::size_t>(nodes[i].uniform_index)] = i;
    }
  }

  DelayMap map;
  map.current.resize(nodes.size());
  map.left.resize(nodes.size());
  using Kind = DelayRef::Kind;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::int64_t k = nodes[i].uniform_index;
    if (k >= grid.steps_per_delay) {
      const std::size_t target = uniform_pos[static_cast<std::size_t>(k - grid.steps_per_delay)];
      map.current[i] = DelayRef{Kind::kNodePost, 0.0, target};
      map.left[i] = DelayRef{Kind::kNodePre, 0.0, target};
      continue;
    }
    const double theta = nodes[i].time - grid.tau;
    if (theta <= 0.0) {
      map.current[i] = DelayRef{Kind::kSegmentValue, theta, 0};
      map.left[i] = DelayRef{Kind::kSegmentLeft, theta, 0};
      continue;
    }
    // Off-lattice node past the first delay window: locate the grid node at
    // or before theta. An exact hit keeps the pre/post distinction.
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), theta,
                                     [](double t, const EventNode& node) { return t < node.time; });
    const std::size_t target = static_cast<std::size_t>(it - nodes.begin()) - 1;
    if (nodes[target].time == theta) {
      map.current[i] = DelayRef{Kind::kNodePost, 0.0, target};
      map.left[i] = DelayRef{Kind::kNodePre, 0.0, target};
    } else {
      map.current[i] = DelayRef{Kind::kNodePost, 0.0, target};
      map.left[i] = map.current[i];
    }
  }
  return map;
}

// Euler-Maruyama between event nodes, jump applied on arrival. The delayed
// argument of drift and diffusion over [t_i, t_{i+1}) is X(t_i - tau); the
// jump at t uses the left limit X((t - tau)-). When frozen_source is set the
// delayed channel reads that record instead of the path being built.
inline PathRecord integrate_on_grid(const GeneralCoefficients& coeffs,
                                    const model::SegmentPtr& segment,
                                    const std::vector<EventNode>& nodes,
                                    const std::vector<double>& brownian, const DelayMap& dmap,
                                    const PathRecord* frozen_source) {
  const std::size_t n = nodes.size();
  std::vector<double> pre(n), post(n), times(n);
  std::vector<unsigned char> flags(n);
  std::vector<std::int64_t> uniform(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = nodes[i].time;
    flags[i] = nodes[i].is_jump ? 1 : 0;
    uniform[i] = nodes[i].uniform_index;
  }

  const auto resolve = [&](const DelayRef& ref) -> double {
    using Kind = DelayRef::Kind;
    if (frozen_source == nullptr) {
      switch (ref.kind) {
        case Kind::kSegmentValue: return segment->value_at(ref.theta);
        case Kind::kSegmentLeft: return segment->left_value_at(ref.theta);
        case Kind::kNodePost: return post[ref.node];
        case Kind::kNodePre: return pre[ref.node];
      }
    } else {
      switch (ref.kind) {
        case Kind::kSegmentValue: return frozen_source->value_at(ref.theta);
        case Kind::kSegmentLeft: return frozen_source->left_value_at(ref.theta);
        case Kind::kNodePost: return frozen_source->value_at(nodes[ref.node].time);
        case Kind::kNodePre: return frozen_source->left_value_at(nodes[ref.node].time);
      }
    }
    throw std::logic_error("unreachable delay reference kind");
  };
  const auto guard = [](double v, double t) {
    if (!std::isfinite(v) || std::abs(v) > kBlowupLimit) throw PathBlowupError(t);
  };

  double state = segment->value_at(0.0);
  pre[0] = post[0] = state;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double t = nodes[i].time;
    const double h = nodes[i + 1].time - t;
    const double delayed = resolve(dmap.current[i]);
    const double dw = brownian[i + 1] - brownian[i];
    state = post[i] + coeffs.drift(post[i], delayed, t) * h +
            coeffs.diffusion(post[i], delayed, t) * dw;
    guard(state, nodes[i + 1].time);
    pre[i + 1] = state;
    if (nodes[i + 1].is_jump) {
      const double delayed_left = resolve(dmap.left[i + 1]);
      state += coeffs.jump(state, delayed_left, nodes[i + 1].time, nodes[i + 1].mark);
      guard(state, nodes[i + 1].time);
    }
    post[i + 1] = state;
  }

  return PathRecord(segment, std::move(times), std::move(pre), std::move(post), std::move(flags),
                    std::move(uniform));
}

// Aligns the stored skeleton with an event grid. The grid's node times must
// appear in the skeleton exactly; a skeleton finer than the grid is allowed,
// which is what lets refinement studies integrate several resolutions against
// one draw of the noise. Power-of-two lattice refinements share node times
// exactly, so the match never depends on a tolerance.
inline std::vector<double> checked_skeleton(const std::vector<EventNode>& nodes,
                                            const randomness::NoiseRealization& noise) {
  std::vector<double> values(nodes.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    while (j < noise.skeleton_times.size() && noise.skeleton_times[j] < nodes[i].time) ++j;
    if (j == noise.skeleton_times.size() || noise.skeleton_times[j] != nodes[i].time) {
      throw std::invalid_argument("event grid node missing from the noise skeleton");
    }
    values[i] = noise.skeleton_values[j];
  }
  return values;
}

}  // namespace detail

// Draws the full noise for one path: jump events on (0, horizon] and the
// Brownian skeleton at every event-grid node. The skeleton is generated once
// here; integrators only ever read it back, so every scheme sees the same
// driving noise.
inline randomness::NoiseRealization realize_noise(const randomness::RngPolicy& policy,
                                                  std::uint64_t path_index,
                                                  const randomness::MarkSpace& space,
                                                  const GridSpec& grid) {
  auto streams = randomness::derive_path_streams(policy, path_index);
  auto events = randomness::sample_jump_events(space, grid.horizon, streams);
  const auto nodes = build_event_grid(grid, events);

  randomness::NoiseRealization noise;
  noise.horizon = grid.horizon;
  noise.skeleton_times.reserve(nodes.size());
  for (const auto& node : nodes) noise.skeleton_times.push_back(node.time);

  const std::vector<double> positive_times(noise.skeleton_times.begin() + 1,
                                           noise.skeleton_times.end());
  const auto values = randomness::sample_brownian_skeleton(positive_times, streams.brownian);
  noise.skeleton_values.resize(nodes.size());
  noise.skeleton_values[0] = 0.0;
  std::copy(values.begin(), values.end(), noise.skeleton_values.begin() + 1);

  noise.jump_events = std::move(events);
  noise.master_seed = policy.master_seed;
  noise.path_index = path_index;
  return noise;
}

// Integrates one problem against one realized noise. Compensated problems
// are rewritten to pure-jump form first, so both forms of the same process
// produce identical records.
inline PathRecord integrate_path(const model::SddeProblem& problem,
                                 const randomness::NoiseRealization& noise,
                                 const GridSpec& grid) {
  const auto nodes = build_event_grid(grid, noise.jump_events);
  const auto skeleton = detail::checked_skeleton(nodes, noise);
  const auto dmap = detail::build_delay_map(nodes, grid);
  return detail::integrate_on_grid(as_general(problem), problem.initial_segment, nodes, skeleton,
                                   dmap, nullptr);
}

// Escape hatch for systems whose diffusion depends on the delayed state.
// Pure-jump semantics only.
inline PathRecord integrate_general(const GeneralCoefficients& coeffs,
                                    const model::SegmentPtr& segment,
                                    const randomness::NoiseRealization& noise,
                                    const GridSpec& grid) {
  if (!coeffs.drift || !coeffs.diffusion || !coeffs.jump) {
    throw std::invalid_argument("general integration needs all three coefficients");
  }
  if (!segment) throw std::invalid_argument("general integration needs an initial segment");
  const auto nodes = build_event_grid(grid, noise.jump_events);
  const auto skeleton = detail::checked_skeleton(nodes, noise);
  const auto dmap = detail::build_delay_map(nodes, grid);
  return detail::integrate_on_grid(coeffs, segment, nodes, skeleton, dmap, nullptr);
}

struct PairPaths {
  PathRecord upper;
  PathRecord lower;
};

// Both members of a pair against the same noise, sharing one event grid and
// one delay map.
inline PairPaths integrate_coupled(const model::ComparisonPair& pair,
                                   const randomness::NoiseRealization& noise,
                                   const GridSpec& grid) {
  const auto nodes = build_event_grid(grid, noise.jump_events);
  const auto skeleton = detail::checked_skeleton(nodes, noise);
  const auto dmap = detail::build_delay_map(nodes, grid);
  PathRecord upper = detail::integrate_on_grid(as_general(pair.upper), pair.upper.initial_segment,
                                               nodes, skeleton, dmap, nullptr);
  PathRecord lower = detail::integrate_on_grid(as_general(pair.lower), pair.lower.initial_segment,
                                               nodes, skeleton, dmap, nullptr);
  return PairPaths{std::move(upper), std::move(lower)};
}

// One Picard-type iterate: the delayed channel is frozen to a previously
// computed record while the instantaneous channels stay live.
inline PathRecord integrate_frozen(const model::SddeProblem& base, const PathRecord& source,
                                   const randomness::NoiseRealization& noise,
                                   const GridSpec& grid) {
  if (source.horizon() + 1e-12 < grid.horizon) {
    throw std::invalid_argument("frozen source must cover the integration horizon");
  }
  const auto nodes = build_event_grid(grid, noise.jump_events);
  const auto skeleton = detail::checked_skeleton(nodes, noise);
  const auto dmap = detail::build_delay_map(nodes, grid);
  return detail::integrate_on_grid(as_general(base), base.initial_segment, nodes, skeleton, dmap,
                                   &source);
}

// Iterated freezing: level 3 freezes the delayed channel to first_source,
// every later level freezes to its predecessor. Returns levels 3..max_level
// in order.
inline std::vector<PathRecord> integrate_tower(const model::SddeProblem& base,
                                               const PathRecord& first_source, int max_level,
                                               const randomness::NoiseRealization& noise,
                                               const GridSpec& grid) {
  if (max_level < 3) throw std::invalid_argument("iteration tower starts at level 3");
  std::vector<PathRecord> levels;
  levels.reserve(static_cast<std::size_t>(max_level - 2));
  const PathRecord* source = &first_source;
  for (int level = 3; level <= max_level; ++level) {
    levels.push_back(integrate_frozen(base, *source, noise, grid));
    source = &levels.back();
  }
  return levels;
}

inline void write_path_csv(const PathRecord& record, std::ostream& out) {
  out << "time,value_pre,value_post,jump\n";
  char buffer[128];
  for (std::size_t i = 0; i < record.size(); ++i) {
    std::snprintf(buffer, sizeof buffer, "%.17g,%.17g,%.17g,%d\n", record.times()[i],
                  record.values_pre()[i], record.values_post()[i],
                  record.jump_flags()[i] ? 1 : 0);
    out << buffer;
  }
}

}  // namespace sdde::engine
