#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pllvi/autodiff.hpp"
#include "pllvi/rng.hpp"

namespace pllvi {

struct DirichletParams {
  std::vector<double> alpha;
};

struct GaussianDiag {
  std::vector<double> mu;
  std::vector<double> log_var;
};

// A Dirichlet sample together with the Gamma(alpha_j, 1) draws it was
// normalized from; the draws are what the implicit gradient differentiates.
struct DirichletDraw {
  std::vector<double> y;
  std::vector<double> gammas;
};

enum class DirichletSampler {
  marsaglia_tsang,  // rejection sampler, variable RNG consumption
  inverse_cdf,      // one uniform per component; smooth in alpha for a fixed stream
};

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 20.0;
inline constexpr double kSimplexClamp = 1e-12;

// ---- Gamma -----------------------------------------------------------------------
// Marsaglia-Tsang squeeze method; shapes below 1 use the u^(1/a) boost.
double sample_gamma(double shape, Rng& rng);
double sample_gamma_inverse_cdf(double shape, Rng& rng);
// Implicit reparameterization dg/dalpha = -(dF/dalpha) / f(g) for the
// Gamma(alpha, 1) CDF F and density f.
double gamma_sample_grad(double alpha, double g);

// ---- Dirichlet -------------------------------------------------------------------
DirichletDraw sample_dirichlet(const DirichletParams& alpha, Rng& rng,
                               DirichletSampler sampler = DirichletSampler::marsaglia_tsang);
double dirichlet_log_pdf(std::span<const double> y, std::span<const double> alpha);
double kl_dirichlet(const DirichletParams& q, const DirichletParams& p);
// Contribution of one retained draw to dL/dalpha given dL/dy.
std::vector<double> dirichlet_sample_grad(const DirichletParams& alpha, const DirichletDraw& draw,
                                          std::span<const double> downstream_grad);

// Tape version: alpha [n, k] -> y [n * b, k], rows i*b .. i*b+b-1 drawn from
// Dir(alpha_i). Backward uses the implicit gradient of the retained draws.
Var sample_dirichlet(Var alpha, std::size_t b, Rng& rng,
                     DirichletSampler sampler = DirichletSampler::marsaglia_tsang);
// Row-wise KL(Dir(q_i) || Dir(p_i)); p may be a single row [1, k] shared by all rows. -> [n, 1]
Var kl_dirichlet(Var q_alpha, Var p_alpha);

// ---- Gaussian --------------------------------------------------------------------
// z = mu + exp(log_var / 2) * eps, log_var clamped to [-20, 20].
std::vector<double> sample_gaussian(const GaussianDiag& g, Rng& rng);
double kl_gaussian_std(const GaussianDiag& g);
// Row-wise 1/2 sum_i (sigma_i^2 + mu_i^2 - 1 - log sigma_i^2) for log_var [n, m]. -> [n, 1]
Var kl_gaussian_std(Var mu, Var log_var);
// Tape reparameterization with externally drawn eps of the same shape as mu.
Var reparameterize(Var mu, Var log_var, const Tensor& eps);
// Standard normal draws of the given shape.
Tensor standard_normal(Shape shape, Rng& rng);

// log sum_i exp(v_i) with max-shift. Throws ShapeError on empty input.
double log_sum_exp(std::span<const double> values);

}  // namespace pllvi
