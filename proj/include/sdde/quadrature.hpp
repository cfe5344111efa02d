#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace sdde::quadrature {

// Node count used for compensator integrals over density mark spaces. Order
// 64 integrates polynomials up to degree 127 exactly, far beyond any
// coefficient family shipped here.
inline constexpr int kCompensatorNodes = 64;

struct GaussLegendreRule {
  std::vector<double> nodes;    // ascending, on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// Newton iteration on Legendre polynomials via the three-term recurrence.
inline GaussLegendreRule compute_gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be positive");
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p_curr = 1.0;
      double p_prev = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p_before = p_prev;
        p_prev = p_curr;
        p_curr = ((2.0 * j + 1.0) * x * p_prev - j * p_before) / (j + 1.0);
      }
      derivative = n * (x * p_curr - p_prev) / (x * x - 1.0);
      const double step = p_curr / derivative;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

inline const GaussLegendreRule& gauss_legendre(int n) {
  static std::map<int, GaussLegendreRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, compute_gauss_legendre(n)).first;
  }
  return it->second;
}

}  // namespace sdde::quadrature
