// Smallest end-to-end use of the library: take a catalog scenario, check the
// comparison hypotheses on sampled points, then measure how often the
// integrated pair breaks the claimed ordering.
#include <cstdio>

#include "sdde/comparison.hpp"
#include "sdde/conditions.hpp"
#include "sdde/scenarios.hpp"

int main() {
  using namespace sdde;

  const auto scenario = scenarios::make_affine_theorem({});

  const auto sample = conditions::make_domain_sample(scenario.pair, 160, 42);
  const auto report = conditions::evaluate_pair(scenario.pair, sample);
  for (const auto& [key, result] : report.entries) {
    std::printf("%-26s %-12s margin %.4g\n", conditions::to_string(key).c_str(),
                conditions::verdict_string(result).c_str(), result.margin);
  }

  const engine::GridSpec grid(1.0, 64, 2.0);
  const randomness::RngPolicy policy{42};
  const auto stats = comparison::ordering_statistics(scenario.pair, 4000, grid, policy);
  std::printf("\nviolation probability %.4f over %zu paths, worst gap %.4g\n",
              stats.violation_prob, stats.n_paths, stats.max_violation);

  return report.all_passed() && stats.violation_prob == 0.0 ? 0 : 1;
}
