#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pllvi/nn.hpp"
#include "pllvi/rng.hpp"

namespace pllvi {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// n instances with d features, a candidate mask over k classes each, and
// optionally the hidden true labels (used only for generation and scoring).
struct PLLDataset {
  std::size_t n = 0, d = 0, k = 0;
  std::vector<double> features;          // n x d, row-major
  std::vector<std::uint8_t> candidates;  // n x k, 0/1
  std::optional<std::vector<int>> true_labels;
  std::vector<std::string> comments;     // '#' header lines, kept for provenance

  std::span<const double> x(std::size_t i) const { return {features.data() + i * d, d}; }
  std::span<const std::uint8_t> s(std::size_t i) const { return {candidates.data() + i * k, k}; }
  std::span<std::uint8_t> s(std::size_t i) { return {candidates.data() + i * k, k}; }
  std::size_t candidate_count(std::size_t i) const;
  double mean_candidate_size() const;
  bool has_true_labels() const { return true_labels.has_value(); }

  // Throws std::invalid_argument when a candidate set is empty, misses its
  // true label, or the buffers do not match n, d, k.
  void validate() const;
  PLLDataset subset(std::span<const std::size_t> ids) const;

  bool operator==(const PLLDataset&) const = default;
};

// `.pll` text format: optional '#' comment lines, then "n d k", then n rows of
// d floats, a k-character 0/1 mask (character j is class j) and the true label
// or -1. Floats are written in shortest round-trip form.
PLLDataset load_dataset(const std::filesystem::path& path);
PLLDataset parse_dataset(const std::string& text);
void save_dataset(const PLLDataset& ds, const std::filesystem::path& path);
std::string format_dataset(const PLLDataset& ds);

// Per-feature z-scoring fitted on training data; zero-variance features pass
// through centred.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const PLLDataset& ds, std::span<const std::size_t> ids);
  static Standardizer identity(std::size_t d);
  Tensor transform(const PLLDataset& ds, std::span<const std::size_t> ids) const;
  std::vector<double> transform_row(std::span<const double> x) const;
};

// Isotropic unit-variance Gaussian blobs; the k means sit equally spaced on a
// circle of radius `separation` inside a random 2-plane. Balanced labels,
// singleton candidate sets.
PLLDataset synth_blobs(std::size_t n, std::size_t k, std::size_t d, double separation, Rng& rng);

// ---- supervised MLP (probe for candidate generation, and the supervised oracle) ----
struct SupervisedConfig {
  std::size_t epochs = 50;
  std::size_t hidden = 256;
  std::size_t batch_size = 256;
  double lr = 1e-3;
};

class SupervisedModel {
 public:
  SupervisedModel(std::size_t d, std::size_t k, const SupervisedConfig& config, Rng& rng);
  // Softmax cross-entropy on the true labels of ds (rows ids).
  void train(const PLLDataset& ds, std::span<const std::size_t> ids, Rng& rng);
  // n x k class probabilities.
  Tensor predict_proba(const PLLDataset& ds, std::span<const std::size_t> ids);
  std::vector<int> predict(const PLLDataset& ds, std::span<const std::size_t> ids);

 private:
  SupervisedConfig config_;
  Mlp net_;
  Standardizer standardizer_;
  std::size_t k_;
};

// ---- candidate generation -----------------------------------------------------------
enum class GenStrategy { instance_dependent, longtail_mix };

struct GenSpec {
  GenStrategy strategy = GenStrategy::longtail_mix;
  double mix_instance = 0.3;   // weight of the probe-confusion term
  double mix_longtail = 0.7;   // weight of the class-rank term
  double tail_base = 0.025;
  std::uint64_t probe_seed = 0;
  std::optional<std::vector<std::size_t>> permutation;  // class -> rank
  SupervisedConfig probe;

  void validate(std::size_t k) const;
};

// tail_base^((rank + 1) / k)
double longtail_rate(std::size_t rank, std::size_t k, double tail_base);
// g_j / max_{j' != j} g_j'
double confusion_rate(std::span<const double> probs, std::size_t label);
// Inclusion probability of every class for an instance with true label y
// (entry y is 1); clipped to [0, 1].
std::vector<double> inclusion_probabilities(std::span<const double> probs, int y,
                                            std::span<const std::size_t> rank, const GenSpec& spec);
// Redraws every candidate set from the given probe probabilities (n x k).
PLLDataset draw_candidates(const PLLDataset& ds, const Tensor& probs, std::span<const std::size_t> rank,
                           const GenSpec& spec, Rng& rng);
// Trains the probe (seeded from spec.probe_seed) on all rows, then draws.
PLLDataset generate_candidates(const PLLDataset& ds, const GenSpec& spec, Rng& rng);
std::vector<std::size_t> random_permutation(std::size_t k, Rng& rng);

// ---- candidate co-occurrence ------------------------------------------------------------
struct Cooccurrence {
  std::size_t k = 0;
  // (y, j): instances with true label y whose set contains j != y; diagonal = class counts.
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t y, std::size_t j) const { return counts[y * k + j]; }
  // Rows divided by the class count (zero rows stay zero).
  std::vector<double> row_normalized() const;
  std::string to_csv(bool normalized) const;
};

Cooccurrence cooccurrence(const PLLDataset& ds);

}  // namespace pllvi

namespace pllvi {

// Fisher-Yates over [0, n) driven by the run RNG.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);
std::vector<std::size_t> all_indices(std::size_t n);

}  // namespace pllvi
