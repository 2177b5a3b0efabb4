#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pllvi/autodiff.hpp"
#include "pllvi/data.hpp"
#include "pllvi/distributions.hpp"
#include "pllvi/models.hpp"
#include "pllvi/rng.hpp"

namespace pllvi {

inline constexpr double kCandidateFloor = 1e-12;

// p(s | y) = 2^-(k-1) sum_{j in s} y_j
double candidate_mass(std::span<const std::uint8_t> s, std::span<const double> y);

struct LogCandidateMass {
  double value = 0.0;
  bool degenerate = false;  // the inner sum was below the floor (e.g. s empty)
};
LogCandidateMass log_candidate_mass(std::span<const std::uint8_t> s, std::span<const double> y);
// Row-wise log p(s | y) for y [r, k] and indicator rows mask [r, k] -> [r, 1].
Var log_candidate_mass(Var y, const Tensor& mask);
// Closed form of E_{y ~ Dir(alpha)}[log p(s | y)]: psi(alpha_s) - psi(alpha_0) - (k-1) log 2.
double expected_log_candidate_mass(std::span<const std::uint8_t> s, std::span<const double> alpha);

// A mini-batch: standardized features and candidate indicators.
struct Batch {
  std::vector<std::size_t> ids;
  Tensor x;     // [n, d]
  Tensor mask;  // [n, k]
};
Batch make_batch(const PLLDataset& ds, const Tensor& features, std::span<const std::size_t> ids);

// Importance-weighted estimate of log p(x | y) from b' draws of z per row:
// logsumexp_i [log p(x|y,z_i) + log N(z_i; 0, I) - log r(z_i|x,y)] - log b'.
// x [n, d], y [n, k] -> [n, 1].
Var log_px_given_y(Tape& tape, CvaeNets& nets, Var x, Var y, std::size_t b_prime, Rng& rng, const Pass& pass);

struct ElboBreakdown {
  double generative_term = 0.0;
  double candidate_term = 0.0;
  double kl_term = 0.0;
  double beta = 1.0;
  double total = 0.0;  // generative_term + candidate_term - beta * kl_term
};

struct ElboOptions {
  std::size_t b = 10;
  std::size_t b_prime = 10;
  double beta = 1.0;
  DirichletSampler sampler = DirichletSampler::marsaglia_tsang;
  Pass classifier_pass{};
  Pass cvae_pass{true, false};  // CVAE weights frozen during the classifier update
};

struct ElboResult {
  ElboBreakdown terms;
  Var loss;      // -total on the tape
  Tensor alpha;  // classifier output of this forward pass
};

// Draws b Dirichlet samples per instance first, then the Gaussian noise of
// the importance sampler, so the candidate term only depends on the leading
// part of the stream.
ElboResult beta_elbo_batch(Tape& tape, ClassifierNet& classifier, CvaeNets& nets, const Tensor& prior_alpha,
                           const Batch& batch, const ElboOptions& options, Rng& rng);

// ---- label table ------------------------------------------------------------------
// Per-instance simplex rows supported on the candidate sets.
class LabelTable {
 public:
  LabelTable() = default;
  // Uniform over each candidate set.
  explicit LabelTable(const PLLDataset& ds);

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::span<const double> row(std::size_t i) const { return {rows_.data() + i * k_, k_}; }
  const std::vector<double>& values() const { return rows_; }
  std::vector<double>& values() { return rows_; }
  const std::vector<std::uint8_t>& support() const { return support_; }
  // Rows of ids as a tensor; out_of_range for unknown ids.
  Tensor gather(std::span<const std::size_t> ids) const;
  // y_ij <- 1{j in s_i} alpha_ij / sum_{j' in s_i} alpha_ij'; alpha rows follow ids.
  void update(std::span<const std::size_t> ids, const Tensor& alpha);
  // Largest |row sum - 1| and mass placed outside the support.
  double max_sum_error() const;
  double off_support_mass() const;

 private:
  std::size_t n_ = 0, k_ = 0;
  std::vector<double> rows_;
  std::vector<std::uint8_t> support_;
};

// E_batch[ KL(q_phi || Dir(1 + c * y~)) - E_y[log p(s | y)] ]
struct AblationResult {
  double kl_term = 0.0;
  double candidate_term = 0.0;
  double total = 0.0;  // kl_term - candidate_term
  Var loss;
  Tensor alpha;
};
AblationResult ablation_loss(Tape& tape, ClassifierNet& classifier, const LabelTable& labels, const Batch& batch,
                             std::size_t b, double concentration, Rng& rng,
                             DirichletSampler sampler = DirichletSampler::marsaglia_tsang, const Pass& pass = {});

}  // namespace pllvi
