#include "pllvi/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "pllvi/special.hpp"

namespace pllvi {

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("sample_gamma", "shape must be positive");
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0, rng);
    const double u = rng.uniform();
    return std::exp(std::log(g) + std::log(u) / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_gamma_inverse_cdf(double shape, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("sample_gamma", "shape must be positive");
  return special::gamma_p_inv(shape, rng.uniform());
}

double gamma_sample_grad(double alpha, double g) {
  if (!(g > 0.0)) return 0.0;
  if (g < 1e-100) {
    // Leading order of P(a, g) ~ g^a / Gamma(a + 1) near zero.
    return -g * (std::log(g) - special::digamma(alpha + 1.0)) / alpha;
  }
  const double pdf = special::gamma_pdf(alpha, g);
  const double dp = special::gamma_p_da(alpha, g);
  const double grad = -dp / pdf;
  // Far-tail fallback when the density underflows: d(mean)/d(alpha) scaled to the draw.
  if (!std::isfinite(grad) || pdf == 0.0) return g / alpha;
  return grad;
}

namespace {

void normalize_to_simplex(std::span<const double> gammas, std::span<double> y) {
  const std::size_t k = gammas.size();
  double total = 0.0;
  for (double g : gammas) total += g;
  if (!(total > 0.0)) {
    for (double& v : y) v = 1.0 / static_cast<double>(k);
    return;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    y[j] = std::clamp(gammas[j] / total, kSimplexClamp, 1.0 - kSimplexClamp);
    s += y[j];
  }
  for (double& v : y) v /= s;
}

double draw_gamma(double a, Rng& rng, DirichletSampler sampler) {
  return sampler == DirichletSampler::inverse_cdf ? sample_gamma_inverse_cdf(a, rng) : sample_gamma(a, rng);
}

void require_positive_alpha(const char* op, std::span<const double> alpha) {
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError(op, "alpha components must be positive, got " + std::to_string(a));
}

}  // namespace

DirichletDraw sample_dirichlet(const DirichletParams& alpha, Rng& rng, DirichletSampler sampler) {
  require_positive_alpha("sample_dirichlet", alpha.alpha);
  DirichletDraw draw;
  draw.gammas.reserve(alpha.alpha.size());
  for (double a : alpha.alpha) draw.gammas.push_back(draw_gamma(a, rng, sampler));
  draw.y.resize(alpha.alpha.size());
  normalize_to_simplex(draw.gammas, draw.y);
  return draw;
}

double dirichlet_log_pdf(std::span<const double> y, std::span<const double> alpha) {
  if (y.size() != alpha.size()) throw ShapeError("dirichlet_log_pdf", Shape{y.size()}, Shape{alpha.size()});
  double a0 = 0.0, out = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    a0 += alpha[j];
    out += (alpha[j] - 1.0) * std::log(y[j]) - special::lgamma(alpha[j]);
  }
  return out + special::lgamma(a0);
}

double kl_dirichlet(const DirichletParams& q, const DirichletParams& p) {
  if (q.alpha.size() != p.alpha.size())
    throw ShapeError("kl_dirichlet", Shape{q.alpha.size()}, Shape{p.alpha.size()});
  require_positive_alpha("kl_dirichlet", q.alpha);
  require_positive_alpha("kl_dirichlet", p.alpha);
  double q0 = 0.0, p0 = 0.0;
  for (std::size_t j = 0; j < q.alpha.size(); ++j) {
    q0 += q.alpha[j];
    p0 += p.alpha[j];
  }
  const double psi_q0 = special::digamma(q0);
  double kl = special::lgamma(q0) - special::lgamma(p0);
  for (std::size_t j = 0; j < q.alpha.size(); ++j) {
    kl += special::lgamma(p.alpha[j]) - special::lgamma(q.alpha[j]) +
          (q.alpha[j] - p.alpha[j]) * (special::digamma(q.alpha[j]) - psi_q0);
  }
  return std::max(kl, 0.0);
}

std::vector<double> dirichlet_sample_grad(const DirichletParams& alpha, const DirichletDraw& draw,
                                          std::span<const double> downstream_grad) {
  const std::size_t k = alpha.alpha.size();
  if (draw.gammas.size() != k || draw.y.size() != k)
    throw DomainError("dirichlet_sample_grad", "draw does not carry the retained Gamma variates");
  if (downstream_grad.size() != k)
    throw ShapeError("dirichlet_sample_grad", Shape{downstream_grad.size()}, Shape{k});
  double total = 0.0, dot = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    total += draw.gammas[j];
    dot += downstream_grad[j] * draw.y[j];
  }
  std::vector<double> out(k, 0.0);
  if (!(total > 0.0)) return out;
  for (std::size_t j = 0; j < k; ++j)
    out[j] = (downstream_grad[j] - dot) / total * gamma_sample_grad(alpha.alpha[j], draw.gammas[j]);
  return out;
}

Var sample_dirichlet(Var alpha, std::size_t b, Rng& rng, DirichletSampler sampler) {
  const Tensor& av = alpha.value();
  if (av.rank() != 2) throw ShapeError("sample_dirichlet", "alpha must be [n, k], got " + shape_str(av.shape()));
  if (b == 0) throw ShapeError("sample_dirichlet", "sample count must be >= 1");
  require_positive_alpha("sample_dirichlet", av.values());
  const std::size_t n = av.rows(), k = av.cols();
  Tensor y(Shape{n * b, k});
  auto gammas = std::make_shared<std::vector<double>>(n * b * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < b; ++s) {
      const std::size_t r = i * b + s;
      for (std::size_t j = 0; j < k; ++j) (*gammas)[r * k + j] = draw_gamma(av[i * k + j], rng, sampler);
      normalize_to_simplex(std::span<const double>(gammas->data() + r * k, k), y.row_span(r));
    }
  return alpha.tape->record("sample_dirichlet", std::move(y), {alpha}, [n, k, b, gammas](Tape& t, std::size_t self) {
    const std::size_t ia = t.input(self, 0);
    const Tensor& av = t.value(ia);
    const Tensor& yv = t.value(self);
    const std::span<double> g = t.grad(self);
    std::span<double> ga = t.grad(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s < b; ++s) {
        const std::size_t r = i * b + s;
        double total = 0.0, dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          total += (*gammas)[r * k + j];
          dot += g[r * k + j] * yv[r * k + j];
        }
        if (!(total > 0.0)) continue;
        for (std::size_t j = 0; j < k; ++j) {
          const double upstream = g[r * k + j] - dot;
          if (upstream == 0.0) continue;
          ga[i * k + j] += upstream / total * gamma_sample_grad(av[i * k + j], (*gammas)[r * k + j]);
        }
      }
  });
}

Var kl_dirichlet(Var q_alpha, Var p_alpha) {
  const Tensor& q = q_alpha.value();
  const Tensor& p = p_alpha.value();
  if (q.rank() != 2 || p.cols() != q.cols() || (p.rows() != 1 && p.rows() != q.rows()))
    throw ShapeError("kl_dirichlet", q.shape(), p.shape());
  Var q0 = sum_rows(q_alpha);
  Var p0 = sum_rows(p_alpha);
  Var cross = sum_rows((q_alpha - p_alpha) * (digamma(q_alpha) - digamma(q0)));
  return lgamma(q0) - sum_rows(lgamma(q_alpha)) - lgamma(p0) + sum_rows(lgamma(p_alpha)) + cross;
}

std::vector<double> sample_gaussian(const GaussianDiag& g, Rng& rng) {
  if (g.mu.size() != g.log_var.size()) throw ShapeError("sample_gaussian", Shape{g.mu.size()}, Shape{g.log_var.size()});
  std::vector<double> z(g.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double lv = std::clamp(g.log_var[i], kLogVarMin, kLogVarMax);
    z[i] = g.mu[i] + std::exp(0.5 * lv) * rng.normal();
  }
  return z;
}

double kl_gaussian_std(const GaussianDiag& g) {
  if (g.mu.size() != g.log_var.size()) throw ShapeError("kl_gaussian_std", Shape{g.mu.size()}, Shape{g.log_var.size()});
  double kl = 0.0;
  for (std::size_t i = 0; i < g.mu.size(); ++i)
    kl += std::exp(g.log_var[i]) + g.mu[i] * g.mu[i] - 1.0 - g.log_var[i];
  return std::max(0.5 * kl, 0.0);
}

Var kl_gaussian_std(Var mu, Var log_var) {
  if (mu.shape() != log_var.shape()) throw ShapeError("kl_gaussian_std", mu.shape(), log_var.shape());
  return scale(sum_rows(exp(log_var) + square(mu) - log_var - 1.0), 0.5);
}

Var reparameterize(Var mu, Var log_var, const Tensor& eps) {
  if (mu.shape() != eps.shape() || log_var.shape() != eps.shape())
    throw ShapeError("reparameterize", mu.shape(), eps.shape());
  Var sigma = exp(scale(clamp(log_var, kLogVarMin, kLogVarMax), 0.5));
  return mu + sigma * mu.tape->constant(eps);
}

Tensor standard_normal(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw ShapeError("log_sum_exp", "empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace pllvi
