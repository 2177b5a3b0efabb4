#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "pllvi/prior.hpp"
#include "pllvi/rng.hpp"
#include "pllvi/tensor.hpp"

namespace pllvi::test {

// Welford running mean/variance for Monte Carlo oracles.
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_of_mean() const { return std::sqrt(variance() / static_cast<double>(n)); }
};

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
  return t;
}

inline std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::vector<double> y(k);
  double s = 0.0;
  for (double& v : y) s += v = -std::log(rng.uniform());
  for (double& v : y) v /= s;
  return y;
}

// Box bounds around a random simplex point, so they are feasible by
// construction. Some coordinates get trivial bounds (0 or 1), some get tight ones.
inline PriorBounds random_feasible_bounds(std::size_t k, Rng& rng) {
  const std::vector<double> p = random_simplex(k, rng);
  PriorBounds b;
  for (std::size_t j = 0; j < k; ++j) {
    const double u = rng.uniform(), v = rng.uniform();
    b.lower.push_back(u < 0.2 ? 0.0 : u > 0.9 ? p[j] : p[j] * rng.uniform());
    b.upper.push_back(v < 0.2 ? 1.0 : v > 0.9 ? p[j] : p[j] + (1.0 - p[j]) * rng.uniform());
  }
  return b;
}

struct GridSearch {
  double best_entropy = -1.0;  // -1 when no grid point is feasible
  std::size_t feasible = 0;
};

// Brute force over the simplex grid with the given number of steps per unit
// (1000 = step 1e-3), k in [2, 4]. Entropy terms come from a table indexed by
// grid coordinate, the last coordinate is implied by the sum.
inline GridSearch grid_max_entropy(const PriorBounds& b, int steps = 1000) {
  const std::size_t k = b.lower.size();
  std::vector<double> h(steps + 1, 0.0);
  for (int i = 1; i <= steps; ++i) {
    const double p = static_cast<double>(i) / steps;
    h[i] = -p * std::log(p);
  }
  std::vector<int> lo(k), hi(k);
  for (std::size_t j = 0; j < k; ++j) {
    lo[j] = static_cast<int>(std::ceil(b.lower[j] * steps - 1e-9));
    hi[j] = static_cast<int>(std::floor(b.upper[j] * steps + 1e-9));
  }
  GridSearch out;
  auto visit_last = [&](int used, double partial) {
    const int rest = steps - used;
    if (rest < lo[k - 1] || rest > hi[k - 1]) return;
    ++out.feasible;
    out.best_entropy = std::max(out.best_entropy, partial + h[rest]);
  };
  if (k == 2) {
    for (int a = lo[0]; a <= hi[0]; ++a) visit_last(a, h[a]);
  } else if (k == 3) {
    for (int a = lo[0]; a <= hi[0]; ++a)
      for (int c = lo[1]; c <= std::min(hi[1], steps - a); ++c) visit_last(a + c, h[a] + h[c]);
  } else {
    for (int a = lo[0]; a <= hi[0]; ++a)
      for (int c = lo[1]; c <= std::min(hi[1], steps - a); ++c) {
        const int used = a + c;
        const int e0 = std::max(lo[2], steps - used - hi[3]);
        const int e1 = std::min(hi[2], steps - used - lo[3]);
        const double partial = h[a] + h[c];
        for (int e = e0; e <= e1; ++e) {
          ++out.feasible;
          out.best_entropy = std::max(out.best_entropy, partial + h[e] + h[steps - used - e]);
        }
      }
  }
  return out;
}

}  // namespace pllvi::test
