#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pllvi/distributions.hpp"
#include "pllvi/optim.hpp"
#include "support.hpp"

namespace pllvi {
namespace {

using test::Moments;

constexpr double kZ = 3.0;  // standard errors

// log q(y) - log p(y) for Dirichlets, with the normalizers hoisted.
struct LogRatio {
  std::vector<double> dq;
  double c = 0.0;
  LogRatio(const std::vector<double>& q, const std::vector<double>& p) {
    double q0 = 0, p0 = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      q0 += q[j];
      p0 += p[j];
      c += boost::math::lgamma(p[j]) - boost::math::lgamma(q[j]);
      dq.push_back(q[j] - p[j]);
    }
    c += boost::math::lgamma(q0) - boost::math::lgamma(p0);
  }
  double operator()(const std::vector<double>& y) const {
    double v = c;
    for (std::size_t j = 0; j < y.size(); ++j) v += dq[j] * std::log(y[j]);
    return v;
  }
};

TEST(Gamma, SamplerMoments) {
  for (DirichletSampler s : {DirichletSampler::marsaglia_tsang, DirichletSampler::inverse_cdf}) {
    for (double a : {0.3, 1.0, 4.5}) {
      Rng rng(17);
      Moments m;
      for (int i = 0; i < 100000; ++i)
        m.add(s == DirichletSampler::inverse_cdf ? sample_gamma_inverse_cdf(a, rng) : sample_gamma(a, rng));
      EXPECT_NEAR(m.mean, a, kZ * m.stderr_of_mean()) << a;
      EXPECT_NEAR(m.variance(), a, 0.05 * a) << a;
    }
  }
  Rng rng(1);
  EXPECT_THROW(sample_gamma(0.0, rng), DomainError);
}

TEST(Dirichlet, SamplesLieOnSimplex) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const DirichletParams a{{0.05 + 3 * rng.uniform(), 0.05 + 3 * rng.uniform(), 0.05 + 3 * rng.uniform()}};
    const DirichletDraw d = sample_dirichlet(a, rng);
    double s = 0.0;
    for (double v : d.y) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Dirichlet, RejectsNonPositiveAlpha) {
  Rng rng(3);
  EXPECT_THROW(sample_dirichlet(DirichletParams{{1.0, 0.0}}, rng), DomainError);
  EXPECT_THROW(sample_dirichlet(DirichletParams{{1.0, -2.0}}, rng), DomainError);
}

TEST(Dirichlet, EmpiricalMeans) {
  Rng rng(4);
  std::vector<Moments> m(3);
  for (int i = 0; i < 100000; ++i) {
    const DirichletDraw d = sample_dirichlet(DirichletParams{{1, 1, 1}}, rng);
    for (int j = 0; j < 3; ++j) m[j].add(d.y[j]);
  }
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(m[j].mean, 1.0 / 3, kZ * m[j].stderr_of_mean());
  Moments first;
  for (int i = 0; i < 100000; ++i) first.add(sample_dirichlet(DirichletParams{{10, 1}}, rng).y[0]);
  EXPECT_NEAR(first.mean, 10.0 / 11, kZ * first.stderr_of_mean());
}

TEST(Dirichlet, KlExamples) {
  EXPECT_EQ(kl_dirichlet(DirichletParams{{2.5, 1.2, 7}}, DirichletParams{{2.5, 1.2, 7}}), 0.0);
  EXPECT_NEAR(kl_dirichlet(DirichletParams{{2, 1}}, DirichletParams{{1, 1}}), std::numbers::ln2 - 0.5, 1e-14);
  EXPECT_THROW(kl_dirichlet(DirichletParams{{1, 1}}, DirichletParams{{1, 1, 1}}), ShapeError);
}

TEST(Dirichlet, KlExampleMatchesMonteCarlo) {
  Rng rng(5);
  const std::vector<double> q{2, 1}, p{1, 1};
  const LogRatio lr(q, p);
  Moments m;
  for (int i = 0; i < 1000000; ++i) m.add(lr(sample_dirichlet(DirichletParams{q}, rng).y));
  EXPECT_NEAR(m.mean, std::numbers::ln2 - 0.5, kZ * m.stderr_of_mean());
}

TEST(Dirichlet, KlMatchesMonteCarloOnRandomPairs) {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    std::vector<double> q(k), p(k);
    for (std::size_t j = 0; j < k; ++j) {
      q[j] = 1 + 9 * rng.uniform();
      p[j] = 1 + 9 * rng.uniform();
    }
    const LogRatio lr(q, p);
    Moments m;
    for (int i = 0; i < 200000; ++i) m.add(lr(sample_dirichlet(DirichletParams{q}, rng).y));
    const double kl = kl_dirichlet(DirichletParams{q}, DirichletParams{p});
    EXPECT_GE(kl, 0.0);
    EXPECT_NEAR(m.mean, kl, kZ * m.stderr_of_mean()) << "trial " << trial;
  }
}

TEST(Dirichlet, KlNonNegative) {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = 2 + rng.below(6);
    DirichletParams q, p;
    for (std::size_t j = 0; j < k; ++j) {
      q.alpha.push_back(std::exp(4 * rng.uniform() - 2));
      p.alpha.push_back(std::exp(4 * rng.uniform() - 2));
    }
    EXPECT_GE(kl_dirichlet(q, p), 0.0);
  }
}

TEST(Dirichlet, TapeKlMatchesScalarAndGradChecks) {
  Rng rng(8);
  const Tensor q = test::random_tensor({3, 4}, rng, 0.5, 6);
  const Tensor p = test::random_tensor({1, 4}, rng, 0.5, 6);
  Tape tape;
  const Tensor kl = kl_dirichlet(tape.constant(q), tape.constant(p)).value();
  for (std::size_t r = 0; r < 3; ++r) {
    const auto row = q.row_span(r);
    EXPECT_NEAR(kl[r], kl_dirichlet(DirichletParams{{row.begin(), row.end()}}, DirichletParams{{p[0], p[1], p[2], p[3]}}),
                1e-12);
  }
  GradCheckOptions o;
  o.tol = 1e-4;
  const auto r = grad_check([&](Tape& t, Var v) { return sum(kl_dirichlet(v, t.constant(p))); }, q, o);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Dirichlet, AggregationOracle) {
  // E[log sum_{j in s} y_j] = psi(alpha_s) - psi(alpha_0)
  Rng rng(9);
  const std::vector<double> alpha{0.7, 2.0, 3.5, 1.2, 5.0};
  const std::vector<std::vector<int>> subsets{{0}, {1, 3}, {0, 2, 4}, {0, 1, 2, 3}};
  for (const auto& s : subsets) {
    double as = 0, a0 = 0;
    for (double a : alpha) a0 += a;
    for (int j : s) as += alpha[j];
    Moments m;
    for (int i = 0; i < 100000; ++i) {
      const DirichletDraw d = sample_dirichlet(DirichletParams{alpha}, rng);
      double t = 0;
      for (int j : s) t += d.y[j];
      m.add(std::log(t));
    }
    EXPECT_NEAR(m.mean, boost::math::digamma(as) - boost::math::digamma(a0), kZ * m.stderr_of_mean());
  }
}

// ---- implicit reparameterization ------------------------------------------------------------

// Estimates d/dalpha_i E[y_j] for all i from n draws.
std::vector<Moments> mean_derivative(const std::vector<double>& alpha, std::size_t j, int n, Rng& rng) {
  const std::size_t k = alpha.size();
  std::vector<Moments> m(k);
  std::vector<double> down(k, 0.0);
  down[j] = 1.0;
  for (int s = 0; s < n; ++s) {
    const DirichletDraw d = sample_dirichlet(DirichletParams{alpha}, rng);
    const std::vector<double> g = dirichlet_sample_grad(DirichletParams{alpha}, d, down);
    for (std::size_t i = 0; i < k; ++i) m[i].add(g[i]);
  }
  return m;
}

TEST(DirichletGrad, MeanDerivativeAtUniform) {
  Rng rng(10);
  const auto m = mean_derivative({1, 1}, 0, 100000, rng);
  EXPECT_NEAR(m[0].mean, 0.25, kZ * m[0].stderr_of_mean());
  EXPECT_NEAR(m[1].mean, -0.25, kZ * m[1].stderr_of_mean());
}

TEST(DirichletGrad, SymmetricAlphaGivesEqualComponents) {
  Rng rng(11);
  // f(y) = y_0 + y_1 + y_2 on alpha = (2, 2, 2): every component equal (and 0 in expectation).
  std::vector<Moments> m(3);
  for (int s = 0; s < 50000; ++s) {
    const DirichletDraw d = sample_dirichlet(DirichletParams{{2, 2, 2}}, rng);
    const auto g = dirichlet_sample_grad(DirichletParams{{2, 2, 2}}, d, std::vector<double>{1, 1, 1});
    for (int i = 0; i < 3; ++i) m[i].add(g[i]);
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(m[i].mean, m[0].mean, 1e-12);
  // a symmetric but non-trivial functional: sum of squares
  std::vector<Moments> q(3);
  for (int s = 0; s < 100000; ++s) {
    const DirichletDraw d = sample_dirichlet(DirichletParams{{2, 2, 2}}, rng);
    const auto g = dirichlet_sample_grad(DirichletParams{{2, 2, 2}}, d, std::vector<double>{2 * d.y[0], 2 * d.y[1], 2 * d.y[2]});
    for (int i = 0; i < 3; ++i) q[i].add(g[i]);
  }
  for (int i = 1; i < 3; ++i)
    EXPECT_NEAR(q[i].mean, q[0].mean, kZ * std::hypot(q[i].stderr_of_mean(), q[0].stderr_of_mean()));
}

TEST(DirichletGrad, RandomAlphasMatchAnalyticMeanDerivative) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    std::vector<double> alpha(k);
    double a0 = 0;
    for (double& a : alpha) a0 += a = 0.5 + 4.5 * rng.uniform();
    const std::size_t j = rng.below(k);
    const auto m = mean_derivative(alpha, j, 100000, rng);
    for (std::size_t i = 0; i < k; ++i) {
      const double want = ((i == j ? a0 : 0.0) - alpha[j]) / (a0 * a0);
      EXPECT_NEAR(m[i].mean, want, kZ * m[i].stderr_of_mean()) << "trial " << trial << " i " << i << " j " << j;
    }
  }
}

TEST(DirichletGrad, MissingDrawsRejected) {
  DirichletDraw d;
  d.y = {0.5, 0.5};
  EXPECT_THROW(dirichlet_sample_grad(DirichletParams{{1, 1}}, d, std::vector<double>{1, 0}), DomainError);
}

TEST(DirichletGrad, TapeEstimatorMatchesAnalytic) {
  Rng rng(13);
  Tensor alpha = Tensor::matrix(1, 3, {1.5, 0.8, 3.0});
  alpha.set_requires_grad(true);
  Tape tape;
  const std::size_t n = 100000;
  Var y = sample_dirichlet(tape.leaf(alpha), n, rng);
  // d/dalpha E[y_1], estimated as the gradient of the sample mean
  tape.backward(mean(slice(y, 1, 1, 2)));
  const double a0 = 5.3;
  EXPECT_NEAR((*alpha.grad())[1], (a0 - 0.8) / (a0 * a0), 0.01);
  EXPECT_NEAR((*alpha.grad())[0], -0.8 / (a0 * a0), 0.01);
  EXPECT_NEAR((*alpha.grad())[2], -0.8 / (a0 * a0), 0.01);
}

TEST(DirichletGrad, InverseCdfPathIsSmoothInAlpha) {
  // With a common stream, the inverse-CDF draw is a smooth function of alpha and
  // the implicit gradient equals its finite difference.
  const Tensor a0 = Tensor::matrix(2, 3, {1.3, 2.2, 0.7, 4.0, 1.1, 2.5});
  const Tensor w = Tensor::matrix(2, 3, {0.3, -1.2, 0.8, 1.0, 0.4, -0.6});
  GradCheckOptions o;
  o.tol = 1e-4;
  const auto r = grad_check(
      [&](Tape& t, Var a) {
        Rng rng(99);
        return sum(mul(sample_dirichlet(a, 1, rng, DirichletSampler::inverse_cdf), t.constant(w)));
      },
      a0, o);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

// ---- Gaussian ---------------------------------------------------------------------------------

TEST(Gaussian, ClampedLogVarGivesMean) {
  Rng rng(14);
  const GaussianDiag g{{0.3, -1.0}, {-std::numeric_limits<double>::infinity(), -1e9}};
  for (int i = 0; i < 100; ++i) {
    const auto z = sample_gaussian(g, rng);
    EXPECT_NEAR(z[0], 0.3, 6 * 4.54e-5);
    EXPECT_NEAR(z[1], -1.0, 6 * 4.54e-5);
  }
}

TEST(Gaussian, StandardVariance) {
  Rng rng(15);
  Moments m;
  for (int i = 0; i < 100000; ++i) m.add(sample_gaussian(GaussianDiag{{0}, {0}}, rng)[0]);
  // SE of the sample variance of a normal: sqrt(2 / (n - 1))
  EXPECT_NEAR(m.variance(), 1.0, kZ * std::sqrt(2.0 / (m.n - 1)));
}

TEST(Gaussian, ReparameterizationGradientInMuIsIdentity) {
  Rng rng(16);
  Tensor mu = test::random_tensor({2, 3}, rng);
  const Tensor lv = test::random_tensor({2, 3}, rng);
  const Tensor eps = standard_normal({2, 3}, rng);
  for (std::size_t c = 0; c < 6; ++c) {
    mu.set_requires_grad(true);
    mu.zero_grad();
    Tape tape;
    Var z = reparameterize(tape.leaf(mu), tape.constant(lv), eps);
    Tensor pick(Shape{2, 3});
    pick[c] = 1.0;
    tape.backward(sum(mul(z, tape.constant(pick))));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ((*mu.grad())[i], i == c ? 1.0 : 0.0);
  }
}

TEST(Gaussian, KlExamples) {
  EXPECT_EQ(kl_gaussian_std(GaussianDiag{{0, 0}, {0, 0}}), 0.0);
  EXPECT_NEAR(kl_gaussian_std(GaussianDiag{{1}, {0}}), 0.5, 1e-15);
  EXPECT_NEAR(kl_gaussian_std(GaussianDiag{{0}, {1}}), (std::numbers::e - 2) / 2, 1e-15);
  EXPECT_NEAR((std::numbers::e - 2) / 2, 0.359141, 1e-6);
}

TEST(Gaussian, KlNonNegativeAndTapeAgrees) {
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = 1 + rng.below(5);
    GaussianDiag g;
    for (std::size_t j = 0; j < m; ++j) {
      g.mu.push_back(6 * rng.uniform() - 3);
      g.log_var.push_back(10 * rng.uniform() - 5);
    }
    EXPECT_GE(kl_gaussian_std(g), 0.0);
  }
  const Tensor mu = test::random_tensor({3, 2}, rng), lv = test::random_tensor({3, 2}, rng);
  Tape tape;
  const Tensor kl = kl_gaussian_std(tape.constant(mu), tape.constant(lv)).value();
  for (std::size_t r = 0; r < 3; ++r)
    EXPECT_NEAR(kl[r], kl_gaussian_std(GaussianDiag{{mu.at(r, 0), mu.at(r, 1)}, {lv.at(r, 0), lv.at(r, 1)}}), 1e-14);
  GradCheckOptions o;
  o.tol = 1e-4;
  const auto r = grad_check([&](Tape& t, Var v) { return sum(kl_gaussian_std(v, t.constant(lv))); }, mu, o);
  EXPECT_TRUE(r.passed);
  const auto r2 = grad_check([&](Tape& t, Var v) { return sum(kl_gaussian_std(t.constant(mu), v)); }, lv, o);
  EXPECT_TRUE(r2.passed);
}

TEST(Gaussian, KlMatchesMonteCarlo) {
  Rng rng(18);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = 1 + rng.below(4);
    GaussianDiag g;
    for (std::size_t j = 0; j < m; ++j) {
      g.mu.push_back(2 * rng.uniform() - 1);
      g.log_var.push_back(2 * rng.uniform() - 1);
    }
    Moments mc;
    for (int i = 0; i < 100000; ++i) {
      const auto z = sample_gaussian(g, rng);
      double lr = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const double r = (z[j] - g.mu[j]);
        lr += -0.5 * g.log_var[j] - 0.5 * r * r / std::exp(g.log_var[j]) + 0.5 * z[j] * z[j];
      }
      mc.add(lr);
    }
    EXPECT_NEAR(mc.mean, kl_gaussian_std(g), kZ * mc.stderr_of_mean()) << trial;
  }
}

TEST(LogSumExp, Examples) {
  EXPECT_NEAR(log_sum_exp(std::vector<double>{0, 0}), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(log_sum_exp(std::vector<double>{1000, 1000}), 1000 + std::numbers::ln2, 1e-12);
  EXPECT_EQ(log_sum_exp(std::vector<double>{-3.25}), -3.25);
  EXPECT_THROW(log_sum_exp(std::vector<double>{}), ShapeError);
}

}  // namespace
}  // namespace pllvi
