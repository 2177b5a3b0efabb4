#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pllvi/data.hpp"
#include "pllvi/training.hpp"

namespace pllvi {

// Fraction of exact matches; std::invalid_argument on length mismatch or empty input.
double accuracy(std::span<const int> predictions, std::span<const int> truth);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};
// Two-sided Welch test. Both samples with zero variance: p = 1 for equal
// means, p = 0 otherwise.
WelchResult welch_ttest(std::span<const double> a, std::span<const double> b);

double sample_mean(std::span<const double> v);
double sample_std(std::span<const double> v);  // ddof = 1; 0 for a single value

// Candidate-vote kNN: the normalized indicators 1{j in s}/|s| of the
// k_neighbors nearest training rows (Euclidean, ties by row order) are summed
// and normalized. Returns one simplex row per query.
Tensor plknn(const PLLDataset& train, const Tensor& queries, std::size_t k_neighbors);
std::vector<double> plknn(const PLLDataset& train, std::span<const double> query, std::size_t k_neighbors);
// argmax with ties to the smallest class index
int argmax(std::span<const double> v);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
// Per-stratum shuffle; round(test_fraction * |stratum|) rows of each go to
// test. Strata are true labels when present, else identical candidate sets.
Split stratified_split(const PLLDataset& ds, double test_fraction, Rng& rng);

enum class Method { vipll, vipll_ablation, plknn };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct ExperimentConfig {
  Method method = Method::vipll;
  std::size_t n_seeds = 5;
  std::uint64_t seed = 0;  // master seed; run i uses mix_seed(seed + i)
  double test_fraction = 0.2;
  std::size_t k_neighbors = 10;
  TrainConfig train;
  bool parallel_seeds = true;
};

struct RunReport {
  Method method = Method::vipll;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  std::vector<double> wall_ms;
  double mean = 0.0;
  double std = 0.0;
  nlohmann::json config;
  // Welch p-values against other reports, keyed by method name.
  std::map<std::string, WelchResult> comparisons;
  bool not_significantly_worse = true;

  nlohmann::json to_json() const;
};

// Trains and scores one seed; returns test accuracy.
double run_seed(const PLLDataset& ds, const ExperimentConfig& config, std::uint64_t seed,
                std::vector<EpochMetrics>* metrics = nullptr);
RunReport run_experiment(const PLLDataset& ds, const ExperimentConfig& config);

// Flags every report whose accuracies are not significantly worse (Welch,
// unpaired, two-sided p >= level) than the report with the best mean.
void mark_significance(std::vector<RunReport>& reports, double level = 0.05);

}  // namespace pllvi
