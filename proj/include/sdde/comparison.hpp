#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sdde/engine.hpp"
#include "sdde/model.hpp"
#include "sdde/parallel.hpp"
#include "sdde/randomness.hpp"

namespace sdde::comparison {

// Decay rate for the exponentially weighted L2 norm used to measure iterate
// distances, together with the one-step contraction factor it certifies.
// beta = 5 (L + sqrt(L) (1 + sqrt(mass))) makes the factor
// (L + c) / (3 L + 2 c) with c = sqrt(L) (1 + sqrt(mass)), which is at most
// one half for every positive L.
struct BetaResult {
  double beta = 0.0;
  double contraction_bound = 0.0;
};

inline BetaResult compute_beta(double lipschitz, double total_mass) {
  if (!(std::isfinite(lipschitz) && lipschitz > 0.0)) {
    throw std::invalid_argument("lipschitz constant must be positive");
  }
  if (!(std::isfinite(total_mass) && total_mass >= 0.0)) {
    throw std::invalid_argument("jump intensity mass must be nonnegative");
  }
  const double c = std::sqrt(lipschitz) * (1.0 + std::sqrt(total_mass));
  const double beta = 5.0 * (lipschitz + c);
  return BetaResult{beta, (lipschitz + c) / (beta - 2.0 * lipschitz - 3.0 * c)};
}

// Trapezoid value of int v(t)^2 e^(-beta t) dt over the record's time grid.
inline double weighted_norm_sq(const std::vector<double>& times,
                               const std::vector<double>& values, double beta) {
  if (times.size() != values.size()) {
    throw std::invalid_argument("weighted norm needs matching times and values");
  }
  if (times.size() < 2) {
    throw std::invalid_argument("weighted norm needs at least one grid interval");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double dt = times[i + 1] - times[i];
    if (dt < 0.0) throw std::invalid_argument("weighted norm needs nondecreasing times");
    const double w0 = values[i] * values[i] * std::exp(-beta * times[i]);
    const double w1 = values[i + 1] * values[i + 1] * std::exp(-beta * times[i + 1]);
    acc += 0.5 * (w0 + w1) * dt;
  }
  return acc;
}

struct TimeWindow {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

struct CurvePoint {
  double time = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;
};

struct OrderingReport {
  std::size_t n_paths = 0;
  double epsilon = 0.0;
  TimeWindow window;
  // Fraction of paths whose gap upper - lower dips below -epsilon (and below
  // zero for the raw figure) anywhere in the window, pre and post values both
  // scanned.
  double violation_prob = 0.0;
  double violation_prob_raw = 0.0;
  // Magnitude of the worst negative gap seen across all paths; exactly zero
  // when ordering never failed.
  double max_violation = 0.0;
  // E[(lower - upper)^+] with its standard error at the lattice nodes inside
  // the window.
  std::vector<CurvePoint> positive_part_curve;
};

namespace detail {

struct SystemView {
  engine::GeneralCoefficients coefficients;
  model::SegmentPtr segment;
};

inline SystemView view_of(const model::SddeProblem& problem) {
  return SystemView{engine::as_general(problem), problem.initial_segment};
}

struct OrderingAccum {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::size_t violations = 0;
  std::size_t violations_raw = 0;
  double min_gap = std::numeric_limits<double>::infinity();
};

// Shared Monte Carlo core over two systems driven by identical noise. Chunked
// accumulation with in-order combination keeps every statistic bit-identical
// for any thread count.
inline OrderingReport ordering_core(const SystemView& upper, const SystemView& lower,
                                    const randomness::MarkSpace& space, std::size_t n_paths,
                                    const engine::GridSpec& grid,
                                    const randomness::RngPolicy& policy, double epsilon,
                                    TimeWindow window, int threads) {
  if (n_paths == 0) throw std::invalid_argument("ordering statistics need at least one path");
  if (!(std::isfinite(epsilon) && epsilon >= 0.0)) {
    throw std::invalid_argument("epsilon must be finite and nonnegative");
  }
  window.lo = std::max(window.lo, 0.0);
  window.hi = std::min(window.hi, grid.horizon);
  if (!(window.lo < window.hi)) {
    throw std::invalid_argument("ordering window is empty after clamping");
  }

  // Lattice nodes inside the window; identical on every path by construction.
  const auto bare_nodes = engine::build_event_grid(grid, {});
  std::vector<double> curve_times;
  for (const auto& node : bare_nodes) {
    if (node.uniform_index >= 0 && node.time >= window.lo && node.time <= window.hi) {
      curve_times.push_back(node.time);
    }
  }

  const std::size_t n_chunks = chunk_count(n_paths);
  std::vector<OrderingAccum> accums(n_chunks);

  parallel_for(n_chunks, resolve_thread_count(threads), [&](std::size_t chunk) {
    auto [begin, end] = chunk_bounds(chunk, n_paths);
    OrderingAccum& acc = accums[chunk];
    acc.sum.assign(curve_times.size(), 0.0);
    acc.sum_sq.assign(curve_times.size(), 0.0);
    for (std::size_t path = begin; path < end; ++path) {
      const auto noise = engine::realize_noise(policy, path, space, grid);
      const auto nodes = engine::build_event_grid(grid, noise.jump_events);
      const auto skeleton = engine::detail::checked_skeleton(nodes, noise);
      const auto dmap = engine::detail::build_delay_map(nodes, grid);
      engine::PathRecord up = engine::detail::integrate_on_grid(
          upper.coefficients, upper.segment, nodes, skeleton, dmap, nullptr);
      engine::PathRecord low = engine::detail::integrate_on_grid(
          lower.coefficients, lower.segment, nodes, skeleton, dmap, nullptr);

      double path_min = std::numeric_limits<double>::infinity();
      std::size_t slot = 0;
      for (std::size_t i = 0; i < up.size(); ++i) {
        const double t = up.times()[i];
        if (t < window.lo || t > window.hi) continue;
        path_min = std::min(path_min, up.values_pre()[i] - low.values_pre()[i]);
        const double gap = up.values_post()[i] - low.values_post()[i];
        path_min = std::min(path_min, gap);
        if (up.uniform_indices()[i] >= 0) {
          const double pp = gap < 0.0 ? -gap : 0.0;
          acc.sum[slot] += pp;
          acc.sum_sq[slot] += pp * pp;
          ++slot;
        }
      }
      if (slot != curve_times.size()) {
        throw std::logic_error("lattice node bookkeeping out of sync");
      }
      acc.min_gap = std::min(acc.min_gap, path_min);
      if (path_min < -epsilon) ++acc.violations;
      if (path_min < 0.0) ++acc.violations_raw;
    }
  });

  OrderingReport report;
  report.n_paths = n_paths;
  report.epsilon = epsilon;
  report.window = window;
  std::vector<double> sum(curve_times.size(), 0.0);
  std::vector<double> sum_sq(curve_times.size(), 0.0);
  std::size_t violations = 0;
  std::size_t violations_raw = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& acc : accums) {
    for (std::size_t s = 0; s < sum.size(); ++s) {
      sum[s] += acc.sum[s];
      sum_sq[s] += acc.sum_sq[s];
    }
    violations += acc.violations;
    violations_raw += acc.violations_raw;
    min_gap = std::min(min_gap, acc.min_gap);
  }
  report.violation_prob = static_cast<double>(violations) / static_cast<double>(n_paths);
  report.violation_prob_raw = static_cast<double>(violations_raw) / static_cast<double>(n_paths);
  report.max_violation = min_gap < 0.0 ? -min_gap : 0.0;
  report.positive_part_curve.resize(curve_times.size());
  for (std::size_t s = 0; s < curve_times.size(); ++s) {
    const double mean = sum[s] / static_cast<double>(n_paths);
    double se = 0.0;
    if (n_paths > 1) {
      const double var =
          std::max(0.0, (sum_sq[s] - static_cast<double>(n_paths) * mean * mean) /
                            static_cast<double>(n_paths - 1));
      se = std::sqrt(var / static_cast<double>(n_paths));
    }
    report.positive_part_curve[s] = CurvePoint{curve_times[s], mean, se};
  }
  return report;
}

}  // namespace detail

inline void require_grid_matches(const model::ComparisonPair& pair,
                                 const engine::GridSpec& grid) {
  if (grid.tau != pair.upper.tau || grid.horizon != pair.upper.horizon) {
    throw std::invalid_argument("grid must carry the pair's delay and horizon");
  }
}

// Empirical pathwise ordering of a pair under shared noise.
inline OrderingReport ordering_statistics(const model::ComparisonPair& pair, std::size_t n_paths,
                                          const engine::GridSpec& grid,
                                          const randomness::RngPolicy& policy, double epsilon = 0.0,
                                          TimeWindow window = {}, int threads = 1) {
  require_grid_matches(pair, grid);
  return detail::ordering_core(detail::view_of(pair.upper), detail::view_of(pair.lower),
                               pair.upper.coefficients.mark_space, n_paths, grid, policy, epsilon,
                               window, threads);
}

// The expectation curve alone, under a zero tolerance.
inline std::vector<CurvePoint> positive_part_curve(const model::ComparisonPair& pair,
                                                   std::size_t n_paths,
                                                   const engine::GridSpec& grid,
                                                   const randomness::RngPolicy& policy,
                                                   TimeWindow window = {}, int threads = 1) {
  return ordering_statistics(pair, n_paths, grid, policy, 0.0, window, threads)
      .positive_part_curve;
}

struct IterationConfig {
  int max_level = 8;              // iterates 3..max_level
  double epsilon = 1e-8;          // slack for the monotone chain
  std::optional<double> beta;     // weighted-norm decay; derived when absent
  double lipschitz = 1.0;         // feeds compute_beta when beta is absent
};

struct TowerLevel {
  int level = 0;
  // Fraction of (path, node) pairs where this iterate exceeds its
  // predecessor by more than epsilon (and by anything at all for raw).
  double chain_violation_fraction = 0.0;
  double chain_violation_fraction_raw = 0.0;
  double max_chain_violation = 0.0;
  // Largest |iterate - directly integrated lower path| over paths and nodes.
  double sup_gap_to_direct = 0.0;
};

struct TowerReport {
  double beta = 0.0;
  double contraction_bound = 0.0;
  double epsilon = 0.0;
  std::size_t n_paths = 0;
  int max_level = 0;
  std::vector<TowerLevel> levels;      // levels 3..max_level
  // E||X_n - X_(n-1)||^2 in the weighted norm, n = 4..max_level, and the
  // ratios of consecutive entries (zero once the tower has collapsed onto
  // the direct path).
  std::vector<double> iterate_norms;
  std::vector<double> norm_ratios;
};

namespace detail {

struct TowerAccum {
  std::vector<std::size_t> violations;
  std::vector<std::size_t> violations_raw;
  std::vector<double> max_violation;
  std::vector<double> sup_gap;
  std::vector<double> norm_sum;
  std::size_t nodes_seen = 0;
};

}  // namespace detail

// Monte Carlo study of the freezing iteration: level 3 freezes the delayed
// channel of the lower problem to the upper solution, each later level to the
// previous iterate. Reports the monotone-chain quality level by level and the
// weighted-norm distances between consecutive iterates.
inline TowerReport picard_tower_report(const model::ComparisonPair& pair, std::size_t n_paths,
                                       const engine::GridSpec& grid,
                                       const randomness::RngPolicy& policy,
                                       const IterationConfig& config = {}, int threads = 1) {
  require_grid_matches(pair, grid);
  if (config.max_level < 4) {
    throw std::invalid_argument("iteration study needs max_level >= 4");
  }
  if (n_paths == 0) throw std::invalid_argument("iteration study needs at least one path");
  if (!(std::isfinite(config.epsilon) && config.epsilon >= 0.0)) {
    throw std::invalid_argument("epsilon must be finite and nonnegative");
  }
  const double mass = pair.upper.coefficients.mark_space.total_mass();
  double beta = 0.0;
  double bound = 0.0;
  if (config.beta) {
    beta = *config.beta;
    if (!(std::isfinite(beta) && beta > 0.0)) {
      throw std::invalid_argument("beta must be positive");
    }
    bound = compute_beta(config.lipschitz, mass).contraction_bound;
  } else {
    const auto derived = compute_beta(config.lipschitz, mass);
    beta = derived.beta;
    bound = derived.contraction_bound;
  }

  const std::size_t n_levels = static_cast<std::size_t>(config.max_level - 2);
  const std::size_t n_norms = static_cast<std::size_t>(config.max_level - 3);
  const std::size_t n_chunks = chunk_count(n_paths);
  std::vector<detail::TowerAccum> accums(n_chunks);

  parallel_for(n_chunks, resolve_thread_count(threads), [&](std::size_t chunk) {
    auto [begin, end] = chunk_bounds(chunk, n_paths);
    detail::TowerAccum& acc = accums[chunk];
    acc.violations.assign(n_levels, 0);
    acc.violations_raw.assign(n_levels, 0);
    acc.max_violation.assign(n_levels, 0.0);
    acc.sup_gap.assign(n_levels, 0.0);
    acc.norm_sum.assign(n_norms, 0.0);
    for (std::size_t path = begin; path < end; ++path) {
      const auto noise =
          engine::realize_noise(policy, path, pair.upper.coefficients.mark_space, grid);
      const auto both = engine::integrate_coupled(pair, noise, grid);
      const auto tower =
          engine::integrate_tower(pair.lower, both.upper, config.max_level, noise, grid);

      const std::size_t n_nodes = both.lower.size();
      acc.nodes_seen += n_nodes;
      std::vector<double> diff(n_nodes);
      for (std::size_t lvl = 0; lvl < tower.size(); ++lvl) {
        const auto& current = tower[lvl].values_post();
        const auto& previous = lvl == 0 ? both.upper.values_post() : tower[lvl - 1].values_post();
        const auto& direct = both.lower.values_post();
        for (std::size_t i = 0; i < n_nodes; ++i) {
          const double over = current[i] - previous[i];
          if (over > config.epsilon) ++acc.violations[lvl];
          if (over > 0.0) ++acc.violations_raw[lvl];
          if (over > acc.max_violation[lvl]) acc.max_violation[lvl] = over;
          const double gap = std::abs(current[i] - direct[i]);
          if (gap > acc.sup_gap[lvl]) acc.sup_gap[lvl] = gap;
        }
        if (lvl > 0) {
          for (std::size_t i = 0; i < n_nodes; ++i) {
            diff[i] = current[i] - tower[lvl - 1].values_post()[i];
          }
          acc.norm_sum[lvl - 1] += weighted_norm_sq(both.lower.times(), diff, beta);
        }
      }
    }
  });

  TowerReport report;
  report.beta = beta;
  report.contraction_bound = bound;
  report.epsilon = config.epsilon;
  report.n_paths = n_paths;
  report.max_level = config.max_level;
  std::vector<std::size_t> violations(n_levels, 0);
  std::vector<std::size_t> violations_raw(n_levels, 0);
  std::vector<double> max_violation(n_levels, 0.0);
  std::vector<double> sup_gap(n_levels, 0.0);
  std::vector<double> norm_sum(n_norms, 0.0);
  std::size_t nodes_seen = 0;
  for (const auto& acc : accums) {
    for (std::size_t l = 0; l < n_levels; ++l) {
      violations[l] += acc.violations[l];
      violations_raw[l] += acc.violations_raw[l];
      max_violation[l] = std::max(max_violation[l], acc.max_violation[l]);
      sup_gap[l] = std::max(sup_gap[l], acc.sup_gap[l]);
    }
    for (std::size_t m = 0; m < n_norms; ++m) norm_sum[m] += acc.norm_sum[m];
    nodes_seen += acc.nodes_seen;
  }

  report.levels.resize(n_levels);
  for (std::size_t l = 0; l < n_levels; ++l) {
    report.levels[l].level = static_cast<int>(l + 3);
    report.levels[l].chain_violation_fraction =
        static_cast<double>(violations[l]) / static_cast<double>(nodes_seen);
    report.levels[l].chain_violation_fraction_raw =
        static_cast<double>(violations_raw[l]) / static_cast<double>(nodes_seen);
    report.levels[l].max_chain_violation = max_violation[l];
    report.levels[l].sup_gap_to_direct = sup_gap[l];
  }
  report.iterate_norms.resize(n_norms);
  for (std::size_t m = 0; m < n_norms; ++m) {
    report.iterate_norms[m] = norm_sum[m] / static_cast<double>(n_paths);
  }
  report.norm_ratios.resize(n_norms > 0 ? n_norms - 1 : 0);
  for (std::size_t m = 1; m < n_norms; ++m) {
    report.norm_ratios[m - 1] =
        report.iterate_norms[m - 1] > 0.0 ? report.iterate_norms[m] / report.iterate_norms[m - 1]
                                          : 0.0;
  }
  return report;
}

}  // namespace sdde::comparison
