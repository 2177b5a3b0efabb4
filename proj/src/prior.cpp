#include "pllvi/prior.hpp"

#include <algorithm>
#include <cmath>

#include "pllvi/tensor.hpp"

namespace pllvi {

void PriorBounds::validate() const {
  if (lower.size() != upper.size() || lower.empty())
    throw ShapeError("prior bounds", Shape{lower.size()}, Shape{upper.size()});
  double lo = 0.0, hi = 0.0;
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] >= 0.0 && lower[j] <= upper[j] && upper[j] <= 1.0))
      throw DomainError("prior bounds", "need 0 <= lower <= upper <= 1 at class " + std::to_string(j));
    lo += lower[j];
    hi += upper[j];
  }
  if (lo > 1.0 + 1e-12 || hi < 1.0 - 1e-12)
    throw DomainError("prior bounds", "infeasible: sum(lower)=" + std::to_string(lo) + ", sum(upper)=" + std::to_string(hi));
}

PriorBounds bounds_from_dataset(const PLLDataset& ds) { return bounds_from_dataset(ds, all_indices(ds.n)); }

PriorBounds bounds_from_dataset(const PLLDataset& ds, std::span<const std::size_t> ids) {
  if (ids.empty()) throw std::invalid_argument("prior bounds from an empty set");
  std::vector<std::size_t> single(ds.k, 0), member(ds.k, 0);
  for (std::size_t i : ids) {
    const auto s = ds.s(i);
    const std::size_t count = ds.candidate_count(i);
    for (std::size_t j = 0; j < ds.k; ++j) {
      if (!s[j]) continue;
      ++member[j];
      if (count == 1) ++single[j];
    }
  }
  PriorBounds b;
  const double n = static_cast<double>(ids.size());
  for (std::size_t j = 0; j < ds.k; ++j) {
    b.lower.push_back(static_cast<double>(single[j]) / n);
    b.upper.push_back(static_cast<double>(member[j]) / n);
  }
  return b;
}

std::vector<double> solve_max_entropy(const PriorBounds& bounds) {
  bounds.validate();
  const std::size_t k = bounds.lower.size();
  auto total = [&](double lambda) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::clamp(lambda, bounds.lower[j], bounds.upper[j]);
    return s;
  };
  double lo = *std::min_element(bounds.lower.begin(), bounds.lower.end());
  double hi = *std::max_element(bounds.upper.begin(), bounds.upper.end());
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total(mid) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  std::vector<double> pi(k);
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < k; ++j) {
    pi[j] = std::clamp(lambda, bounds.lower[j], bounds.upper[j]);
    if (pi[j] > bounds.lower[j] && pi[j] < bounds.upper[j]) free.push_back(j);
  }
  // Hand the rounding residual to the water level.
  double s = 0.0;
  for (double v : pi) s += v;
  if (!free.empty()) {
    const double share = (1.0 - s) / static_cast<double>(free.size());
    for (std::size_t j : free) pi[j] = std::clamp(pi[j] + share, bounds.lower[j], bounds.upper[j]);
  }
  return pi;
}

std::vector<double> prior_dirichlet_params(std::span<const double> pi, double delta) {
  if (pi.empty()) throw ShapeError("prior_dirichlet_params", "empty prior");
  if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("prior_dirichlet_params", "delta must lie in [0, 1]");
  std::vector<double> floored(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) {
    if (!(pi[j] >= 0.0) || !std::isfinite(pi[j]))
      throw DomainError("prior_dirichlet_params", "prior components must be non-negative");
    floored[j] = std::max(pi[j], kPriorFloor);
  }
  const double mn = *std::min_element(floored.begin(), floored.end());
  std::vector<double> alpha(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) alpha[j] = delta == 0.0 ? 1.0 : std::pow(floored[j] / mn, delta);
  return alpha;
}

PriorVector compute_prior(const PriorBounds& bounds, double delta) {
  PriorVector out;
  out.pi = solve_max_entropy(bounds);
  out.alpha_pi = prior_dirichlet_params(out.pi, delta);
  out.delta = delta;
  for (std::size_t j = 0; j < out.pi.size(); ++j) {
    if (out.pi[j] <= bounds.lower[j]) out.binding_lower.push_back(j);
    if (out.pi[j] >= bounds.upper[j]) out.binding_upper.push_back(j);
  }
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

}  // namespace pllvi
