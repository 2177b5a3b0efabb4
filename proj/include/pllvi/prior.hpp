#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pllvi/data.hpp"

namespace pllvi {

// Box constraints on the class prior: lower_j is the share of instances whose
// candidate set is exactly {j}, upper_j the share whose set contains j.
struct PriorBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  // DomainError unless 0 <= lower <= upper <= 1 and sum(lower) <= 1 <= sum(upper).
  void validate() const;
};

struct PriorVector {
  std::vector<double> pi;
  std::vector<double> alpha_pi;
  double delta = 0.5;
  std::vector<std::size_t> binding_lower;  // classes with pi_j == lower_j
  std::vector<std::size_t> binding_upper;  // classes with pi_j == upper_j
};

inline constexpr double kPriorFloor = 1e-6;

PriorBounds bounds_from_dataset(const PLLDataset& ds);
PriorBounds bounds_from_dataset(const PLLDataset& ds, std::span<const std::size_t> ids);

// Entropy maximizer over the simplex within the box: pi_j = clip(lambda, lower_j, upper_j).
std::vector<double> solve_max_entropy(const PriorBounds& bounds);
// alpha_j = (pi_j / min pi)^delta with pi floored at kPriorFloor.
std::vector<double> prior_dirichlet_params(std::span<const double> pi, double delta);
PriorVector compute_prior(const PriorBounds& bounds, double delta);

double entropy(std::span<const double> p);

}  // namespace pllvi
