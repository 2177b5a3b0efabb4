#include "pllvi/models.hpp"

#include <cmath>
#include <numbers>

namespace pllvi {

Tensor candidate_indicator(std::span<const std::uint8_t> masks, std::size_t k) {
  if (k == 0 || masks.size() % k != 0) throw ShapeError("candidate_indicator", "mask buffer is not a multiple of k");
  Tensor out(Shape{masks.size() / k, k});
  for (std::size_t i = 0; i < masks.size(); ++i) out[i] = masks[i] ? 1.0 : 0.0;
  return out;
}

// ---- classifier --------------------------------------------------------------------

ClassifierNet::ClassifierNet(std::size_t d, std::size_t k, std::size_t hidden, Rng& rng)
    : d_(d), k_(k), mlp_({d + k, hidden, hidden, k}, true, rng) {}

Var ClassifierNet::alpha(Tape& tape, Var x, Var s, const Pass& pass) {
  if (x.value().rank() != 2 || x.value().cols() != d_) throw ShapeError("classifier_alpha", x.shape(), Shape{0, d_});
  if (s.value().rank() != 2 || s.value().cols() != k_ || s.value().rows() != x.value().rows())
    throw ShapeError("classifier_alpha", s.shape(), Shape{x.value().rows(), k_});
  return softplus(mlp_.forward(tape, concat(x, s, 1), pass)) + 1.0;
}

DirichletParams ClassifierNet::classifier_alpha(std::span<const double> x, std::span<const std::uint8_t> s) {
  if (x.size() != d_) throw ShapeError("classifier_alpha", Shape{x.size()}, Shape{d_});
  if (s.size() != k_) throw ShapeError("classifier_alpha", Shape{s.size()}, Shape{k_});
  Tape tape;
  Var a = alpha(tape, tape.constant(Tensor(Shape{1, d_}, std::vector<double>(x.begin(), x.end()))),
                tape.constant(candidate_indicator(s, k_)), Pass{false, false});
  const auto v = a.value().values();
  return {std::vector<double>(v.begin(), v.end())};
}

Tensor ClassifierNet::predict(const Tensor& x) {
  if (x.rank() != 2 || x.cols() != d_) throw ShapeError("predict", x.shape(), Shape{x.rows(), d_});
  Tape tape;
  Var a = alpha(tape, tape.constant(x), tape.constant(Tensor(Shape{x.rows(), k_}, 1.0)), Pass{false, false});
  Tensor g = a.value();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    auto row = g.row_span(r);
    double total = 0.0;
    for (double v : row) total += v;
    for (double& v : row) v /= total;
  }
  return g;
}

// ---- CVAE --------------------------------------------------------------------------

CvaeNets::CvaeNets(std::size_t d, std::size_t k, std::size_t latent, std::size_t hidden, Rng& rng)
    : d_(d), k_(k), m_(latent), encoder_({d + k, hidden, 2 * latent}, false, rng),
      decoder_({k + latent, hidden, d}, false, rng) {}

std::vector<NamedParam> CvaeNets::parameters() {
  std::vector<NamedParam> out = encoder_.parameters("encoder");
  for (NamedParam& p : decoder_.parameters("decoder")) out.push_back(std::move(p));
  return out;
}

CvaeOutput CvaeNets::forward(Tape& tape, Var x, Var y, Rng& rng, const Pass& pass) {
  return forward(tape, x, y, standard_normal(Shape{x.value().rows(), m_}, rng), pass);
}

CvaeOutput CvaeNets::forward(Tape& tape, Var x, Var y, const Tensor& eps, const Pass& pass) {
  // Node values live in the tape's storage, so keep sizes rather than references
  // across the ops below.
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  const std::size_t n = xv.rows();
  if (xv.rank() != 2 || xv.cols() != d_) throw ShapeError("cvae_forward", xv.shape(), Shape{n, d_});
  if (yv.rank() != 2 || yv.cols() != k_ || yv.rows() != n) throw ShapeError("cvae_forward", yv.shape(), Shape{n, k_});
  if (eps.rank() != 2 || eps.rows() != n || eps.cols() != m_)
    throw ShapeError("cvae_forward", eps.shape(), Shape{n, m_});
  Var h = encoder_.forward(tape, concat(x, y, 1), pass);
  CvaeOutput out;
  out.mu = slice(h, 1, 0, m_);
  if (deterministic) {
    out.log_var = tape.constant(Tensor(Shape{n, m_}, kLogVarMin));
  } else {
    out.log_var = clamp(slice(h, 1, m_, 2 * m_), kLogVarMin, kLogVarMax);
  }
  out.z = reparameterize(out.mu, out.log_var, eps);
  out.recon = decoder_.forward(tape, concat(y, out.z, 1), pass);
  out.eps = eps;
  return out;
}

// ---- likelihood and sigma ------------------------------------------------------------

double recon_loglik(std::span<const double> x, std::span<const double> mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("recon_loglik", "sigma must be positive");
  if (x.size() != mu.size()) throw ShapeError("recon_loglik", Shape{x.size()}, Shape{mu.size()});
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - mu[i]) * (x[i] - mu[i]);
  const double var = sigma * sigma;
  return -sq / (2.0 * var) - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var);
}

Var recon_loglik(Var x, Var mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("recon_loglik", "sigma must be positive");
  if (x.shape() != mu.shape()) throw ShapeError("recon_loglik", x.shape(), mu.shape());
  const double var = sigma * sigma;
  const double d = static_cast<double>(x.value().cols());
  return sum_rows(square(x - mu)) * (-1.0 / (2.0 * var)) - 0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

double sigma_ema_update(CvaeNets& nets, double batch_rmse) {
  if (!(batch_rmse >= 0.0)) throw DomainError("sigma_ema_update", "rmse must be non-negative");
  nets.sigma = nets.sigma_ema_decay * nets.sigma + (1.0 - nets.sigma_ema_decay) * std::max(batch_rmse, nets.sigma_floor);
  return nets.sigma;
}

}  // namespace pllvi
