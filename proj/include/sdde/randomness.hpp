#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdde/quadrature.hpp"

namespace sdde::randomness {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer. Bijective on 64-bit words; the avalanche quality is
// what makes keyed counters usable as independent streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Counter-based generator: word i of a stream is mix64(key + i * gamma).
// Streams with distinct keys never share state, so paths and channels can be
// generated in any order, or in parallel, with identical output.
class Stream {
 public:
  explicit Stream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ + (++counter_) * kGoldenGamma); }

  // Uniform on (0, 1]; never returns 0 so log() is always safe.
  double next_uniform() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
  }

  // Box-Muller; consumes exactly two words per normal draw.
  double next_normal() noexcept {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t words_consumed() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Channel ids keep the four per-path random sources (and the validation
// prober) on disjoint streams regardless of how many draws each one makes.
enum class Channel : std::uint64_t {
  kBrownian = 1,
  kJumpCount = 2,
  kJumpTime = 3,
  kMark = 4,
  kProbe = 5,
};

struct RngPolicy {
  std::uint64_t master_seed = 0;

  Stream derive(std::uint64_t path_index, Channel channel) const noexcept {
    std::uint64_t h = mix64(master_seed + kGoldenGamma);
    h = mix64(h + path_index);
    h = mix64(h + static_cast<std::uint64_t>(channel));
    return Stream(h);
  }
};

struct PathStreams {
  Stream brownian;
  Stream jump_count;
  Stream jump_time;
  Stream mark;
};

inline PathStreams derive_path_streams(const RngPolicy& policy, std::uint64_t path_index) {
  return PathStreams{
      policy.derive(path_index, Channel::kBrownian),
      policy.derive(path_index, Channel::kJumpCount),
      policy.derive(path_index, Channel::kJumpTime),
      policy.derive(path_index, Channel::kMark),
  };
}

// Finite intensity measure on the mark space. total_mass() is the arrival
// rate of the driving Poisson random measure; integrate() evaluates
// integrals of a test function against the measure, exactly for atomic
// variants and by fixed-order Gauss-Legendre quadrature for densities.
class MarkSpace {
 public:
  enum class Kind { kFiniteDiscrete, kUniformDensity, kDegenerate };

  static MarkSpace finite_discrete(std::vector<std::pair<double, double>> atoms) {
    if (atoms.empty()) throw std::invalid_argument("finite_discrete needs at least one atom");
    MarkSpace s;
    s.kind_ = Kind::kFiniteDiscrete;
    s.atom_marks_.reserve(atoms.size());
    s.atom_weights_.reserve(atoms.size());
    double total = 0.0;
    for (const auto& [mark, weight] : atoms) {
      if (!std::isfinite(mark) || !std::isfinite(weight)) {
        throw std::invalid_argument("atom marks and weights must be finite");
      }
      if (weight < 0.0) throw std::invalid_argument("atom weights must be nonnegative");
      s.atom_marks_.push_back(mark);
      s.atom_weights_.push_back(weight);
      total += weight;
      s.atom_cdf_.push_back(total);
    }
    s.total_mass_ = total;
    return s;
  }

  static MarkSpace uniform_density(double lo, double hi, double density) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
      throw std::invalid_argument("uniform_density needs finite lo < hi");
    }
    if (!(std::isfinite(density) && density >= 0.0)) {
      throw std::invalid_argument("density must be finite and nonnegative");
    }
    MarkSpace s;
    s.kind_ = Kind::kUniformDensity;
    s.lo_ = lo;
    s.hi_ = hi;
    s.density_ = density;
    s.total_mass_ = density * (hi - lo);
    return s;
  }

  static MarkSpace degenerate(double mark, double total_mass) {
    if (!std::isfinite(mark)) throw std::invalid_argument("mark must be finite");
    if (!(std::isfinite(total_mass) && total_mass >= 0.0)) {
      throw std::invalid_argument("total mass must be finite and nonnegative");
    }
    MarkSpace s;
    s.kind_ = Kind::kDegenerate;
    s.mark_ = mark;
    s.total_mass_ = total_mass;
    return s;
  }

  Kind kind() const noexcept { return kind_; }
  double total_mass() const noexcept { return total_mass_; }

  double sample_mark(Stream& stream) const {
    switch (kind_) {
      case Kind::kDegenerate:
        return mark_;
      case Kind::kUniformDensity:
        return lo_ + (hi_ - lo_) * stream.next_uniform();
      case Kind::kFiniteDiscrete: {
        if (total_mass_ <= 0.0) {
          throw std::logic_error("cannot sample a mark from a zero-mass space");
        }
        const double target = total_mass_ * stream.next_uniform();
        const auto it = std::lower_bound(atom_cdf_.begin(), atom_cdf_.end(), target);
        const std::size_t idx =
            std::min(static_cast<std::size_t>(it - atom_cdf_.begin()), atom_marks_.size() - 1);
        return atom_marks_[idx];
      }
    }
    throw std::logic_error("unreachable mark space kind");
  }

  // Integral of h against the intensity measure.
  double integrate(const std::function<double(double)>& h) const {
    switch (kind_) {
      case Kind::kDegenerate:
        return total_mass_ == 0.0 ? 0.0 : total_mass_ * h(mark_);
      case Kind::kFiniteDiscrete: {
        double acc = 0.0;
        for (std::size_t i = 0; i < atom_marks_.size(); ++i) {
          acc += atom_weights_[i] * h(atom_marks_[i]);
        }
        return acc;
      }
      case Kind::kUniformDensity: {
        if (density_ == 0.0) return 0.0;
        const auto& rule = quadrature::gauss_legendre(quadrature::kCompensatorNodes);
        const double half = 0.5 * (hi_ - lo_);
        const double mid = 0.5 * (hi_ + lo_);
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          acc += rule.weights[i] * h(mid + half * rule.nodes[i]);
        }
        return density_ * half * acc;
      }
    }
    throw std::logic_error("unreachable mark space kind");
  }

  // Deterministic marks that cover the support; used by inequality samplers.
  std::vector<double> probe_marks() const {
    switch (kind_) {
      case Kind::kDegenerate:
        return {mark_};
      case Kind::kFiniteDiscrete:
        return atom_marks_;
      case Kind::kUniformDensity: {
        std::vector<double> marks;
        constexpr int kProbes = 11;
        marks.reserve(kProbes);
        for (int i = 0; i < kProbes; ++i) {
          marks.push_back(lo_ + (hi_ - lo_) * static_cast<double>(i) / (kProbes - 1));
        }
        return marks;
      }
    }
    throw std::logic_error("unreachable mark space kind");
  }

  friend bool operator==(const MarkSpace& a, const MarkSpace& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::kDegenerate:
        return a.mark_ == b.mark_ && a.total_mass_ == b.total_mass_;
      case Kind::kUniformDensity:
        return a.lo_ == b.lo_ && a.hi_ == b.hi_ && a.density_ == b.density_;
      case Kind::kFiniteDiscrete:
        return a.atom_marks_ == b.atom_marks_ && a.atom_weights_ == b.atom_weights_;
    }
    return false;
  }

  // Accessors for serialization.
  const std::vector<double>& atom_marks() const noexcept { return atom_marks_; }
  const std::vector<double>& atom_weights() const noexcept { return atom_weights_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double density() const noexcept { return density_; }
  double degenerate_mark() const noexcept { return mark_; }

 private:
  MarkSpace() = default;

  Kind kind_ = Kind::kDegenerate;
  double total_mass_ = 0.0;
  std::vector<double> atom_marks_;
  std::vector<double> atom_weights_;
  std::vector<double> atom_cdf_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double density_ = 0.0;
  double mark_ = 0.0;
};

// Knuth's product method, split into bounded chunks so exp(-chunk) never
// underflows. Poisson(a + b) = Poisson(a) + Poisson(b) for independent
// summands, so chunking preserves the law.
inline std::uint64_t poisson_count(double mean, Stream& stream) {
  if (!(std::isfinite(mean) && mean >= 0.0)) {
    throw std::invalid_argument("poisson mean must be finite and nonnegative");
  }
  std::uint64_t total = 0;
  double remaining = mean;
  while (remaining > 0.0) {
    const double chunk = std::min(remaining, 256.0);
    const double limit = std::exp(-chunk);
    double prod = 1.0;
    std::uint64_t k = 0;
    do {
      prod *= stream.next_uniform();
      ++k;
    } while (prod > limit);
    total += k - 1;
    remaining -= chunk;
  }
  return total;
}

struct JumpEvent {
  double time = 0.0;
  double mark = 0.0;
};

// Compound-Poisson draw on (0, horizon]: the count comes from the count
// channel, arrival times are sorted uniforms from the time channel, and marks
// are attached from the mark channel after sorting. Exact ties are broken by
// redrawing the later arrival so event times are strictly increasing.
inline std::vector<JumpEvent> sample_jump_events(const MarkSpace& space, double horizon,
                                                 PathStreams& streams) {
  if (!(std::isfinite(horizon) && horizon > 0.0)) {
    throw std::invalid_argument("jump horizon must be positive");
  }
  const std::uint64_t count = poisson_count(space.total_mass() * horizon, streams.jump_count);

  std::vector<double> times(count);
  for (auto& t : times) t = horizon * streams.jump_time.next_uniform();
  std::sort(times.begin(), times.end());
  for (std::size_t i = 1; i < times.size();) {
    if (times[i] == times[i - 1]) {
      times[i] = horizon * streams.jump_time.next_uniform();
      std::sort(times.begin(), times.end());
      i = 1;
    } else {
      ++i;
    }
  }

  std::vector<JumpEvent> events(count);
  for (std::size_t i = 0; i < times.size(); ++i) {
    events[i].time = times[i];
    events[i].mark = space.sample_mark(streams.mark);
  }
  return events;
}

// Brownian skeleton at the given strictly increasing positive times,
// generated once at full resolution. Values are W(t_k); increments over
// consecutive skeleton times are independent N(0, dt).
inline std::vector<double> sample_brownian_skeleton(const std::vector<double>& times,
                                                    Stream& stream) {
  std::vector<double> values(times.size());
  double prev_t = 0.0;
  double prev_w = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (!(std::isfinite(t) && t > prev_t)) {
      throw std::invalid_argument("skeleton times must be strictly increasing and positive");
    }
    prev_w += std::sqrt(t - prev_t) * stream.next_normal();
    prev_t = t;
    values[i] = prev_w;
  }
  return values;
}

// One path's worth of driving noise, frozen at generation time. The skeleton
// covers every event-grid node (time 0 first, value 0) so refining the state
// grid never changes the jump times or the Brownian values at shared nodes.
struct NoiseRealization {
  double horizon = 0.0;
  std::vector<double> skeleton_times;   // starts at 0
  std::vector<double> skeleton_values;  // W at skeleton_times; W(0) = 0
  std::vector<JumpEvent> jump_events;   // strictly increasing times in (0, horizon]
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
};

}  // namespace sdde::randomness
