#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pllvi/data.hpp"
#include "pllvi/models.hpp"
#include "pllvi/objective.hpp"
#include "pllvi/prior.hpp"

namespace pllvi {

struct TrainConfig {
  std::size_t T = 1000;        // main epochs
  std::size_t T_w = 500;       // CVAE warm-up epochs
  std::size_t n_m = 256;       // mini-batch size
  std::size_t b = 10;          // Dirichlet samples per instance
  std::size_t b_prime = 10;    // importance samples per label sample
  double beta = 1.0;
  double delta = 0.5;
  double lr = 1e-3;
  std::size_t m = 32;          // latent dimension
  std::size_t hidden = 256;
  std::uint64_t seed = 0;
  DirichletSampler sampler = DirichletSampler::marsaglia_tsang;
  double ablation_concentration = 10.0;
  std::size_t checkpoint_every = 0;  // epochs; 0 disables
  std::filesystem::path checkpoint_dir;

  // std::invalid_argument naming the offending field.
  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double generative_term = 0.0;
  double candidate_term = 0.0;
  double kl_term = 0.0;
  double total = 0.0;
  double wall_ms = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

struct FitResult {
  ClassifierNet classifier;
  CvaeNets cvae;
  LabelTable labels;
  PriorVector prior;
  Standardizer standardizer;
  std::vector<EpochMetrics> metrics;
  std::vector<double> warmup_mse;  // mean reconstruction MSE per warm-up epoch
  TrainConfig config;

  // Class probabilities for raw (unstandardized) rows of ds.
  Tensor predict(const PLLDataset& ds, std::span<const std::size_t> ids);
  std::vector<int> predict_labels(const PLLDataset& ds, std::span<const std::size_t> ids);
};

struct FitHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<void(const FitResult&, std::size_t epoch)> on_checkpoint;
};

// One CVAE step on the warm-up loss mean_i[-log p(x_i | y_i, z_i) + KL(r || N(0, I))]
// with one z per row, decoder scale `sigma`. Returns the batch RMSE of the reconstruction.
double cvae_step(CvaeNets& nets, Adam& adam, const Tensor& x, const Tensor& y, double sigma, Rng& rng);

// T_w epochs over ids; the loss uses sigma = 1 while nets.sigma tracks the
// EMA of the batch RMSE. Returns the mean MSE of every epoch.
std::vector<double> warmup(CvaeNets& nets, Adam& adam, const PLLDataset& ds, const Tensor& features,
                           const LabelTable& labels, std::span<const std::size_t> ids, const TrainConfig& config,
                           Rng& rng);

// Full training on rows ids of ds (all rows when ids is empty).
FitResult fit(const PLLDataset& ds, std::span<const std::size_t> ids, const TrainConfig& config,
              const FitHooks& hooks = {});
// Discriminative ablation: the label table replaces prior and CVAE.
FitResult fit_ablation(const PLLDataset& ds, std::span<const std::size_t> ids, const TrainConfig& config,
                       const FitHooks& hooks = {});

// ---- checkpoints -------------------------------------------------------------------------
void save_checkpoint(const FitResult& result, std::size_t epoch, const std::filesystem::path& path);
FitResult load_checkpoint(const std::filesystem::path& path);

}  // namespace pllvi
