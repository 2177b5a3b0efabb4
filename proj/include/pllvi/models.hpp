#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pllvi/autodiff.hpp"
#include "pllvi/distributions.hpp"
#include "pllvi/nn.hpp"
#include "pllvi/optim.hpp"
#include "pllvi/rng.hpp"

namespace pllvi {

// k-dim 0/1 indicator rows of the candidate sets, as a tensor.
Tensor candidate_indicator(std::span<const std::uint8_t> masks, std::size_t k);

// f_phi: (x, s) -> R^k_{>=0} through an MLP d+k -> h -> h -> k with batch
// norm and a softplus head; alpha = f + 1.
class ClassifierNet {
 public:
  ClassifierNet() = default;
  ClassifierNet(std::size_t d, std::size_t k, std::size_t hidden, Rng& rng);

  // x [n, d], s [n, k] indicator -> alpha [n, k]
  Var alpha(Tape& tape, Var x, Var s, const Pass& pass);
  // Single instance in inference mode.
  DirichletParams classifier_alpha(std::span<const double> x, std::span<const std::uint8_t> s);
  // g(x) = alpha(x, Y) / sum alpha(x, Y), row-wise; inference mode.
  Tensor predict(const Tensor& x);

  std::size_t d() const { return d_; }
  std::size_t k() const { return k_; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  std::vector<NamedParam> parameters() { return mlp_.parameters("classifier"); }

 private:
  std::size_t d_ = 0, k_ = 0;
  Mlp mlp_;
};

struct CvaeOutput {
  Var mu;        // [n, m]
  Var log_var;   // [n, m], clamped to [-20, 20]
  Var z;         // [n, m]
  Var recon;     // [n, d]
  Tensor eps;    // the standard normal draws behind z
};

// Encoder r_gamma(z | x, y): d+k -> h -> 2m (mean and log-variance halves);
// decoder mu_theta(y, z): k+m -> h -> d. sigma is the decoder noise scale.
class CvaeNets {
 public:
  CvaeNets() = default;
  CvaeNets(std::size_t d, std::size_t k, std::size_t latent, std::size_t hidden, Rng& rng);

  // x [n, d], y [n, k]; eps [n, m] is drawn from rng.
  CvaeOutput forward(Tape& tape, Var x, Var y, Rng& rng, const Pass& pass);
  CvaeOutput forward(Tape& tape, Var x, Var y, const Tensor& eps, const Pass& pass);

  std::size_t d() const { return d_; }
  std::size_t k() const { return k_; }
  std::size_t latent() const { return m_; }
  Mlp& encoder() { return encoder_; }
  Mlp& decoder() { return decoder_; }
  const Mlp& encoder() const { return encoder_; }
  const Mlp& decoder() const { return decoder_; }
  std::vector<NamedParam> parameters();

  double sigma = 1.0;
  double sigma_ema_decay = 0.99;
  double sigma_floor = 1e-2;
  // Forces the encoder log-variance to the lower clamp so z = mu.
  bool deterministic = false;

 private:
  std::size_t d_ = 0, k_ = 0, m_ = 0;
  Mlp encoder_;
  Mlp decoder_;
};

// -||x - mu||^2 / (2 sigma^2) - (d / 2) log(2 pi sigma^2)
double recon_loglik(std::span<const double> x, std::span<const double> mu, double sigma);
// Row-wise version: x, mu [n, d] -> [n, 1].
Var recon_loglik(Var x, Var mu, double sigma);

// sigma <- decay * sigma + (1 - decay) * max(rmse, floor); returns the new sigma.
double sigma_ema_update(CvaeNets& nets, double batch_rmse);

}  // namespace pllvi
