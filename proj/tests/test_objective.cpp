#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "pllvi/objective.hpp"
#include "pllvi/optim.hpp"
#include "support.hpp"

namespace pllvi {
namespace {

using test::random_simplex;
using test::random_tensor;

std::vector<std::uint8_t> subset_mask(std::size_t bits, std::size_t k) {
  std::vector<std::uint8_t> s(k);
  for (std::size_t j = 0; j < k; ++j) s[j] = (bits >> j) & 1u;
  return s;
}

// ---- candidate mass -------------------------------------------------------------------

TEST(CandidateMass, Examples) {
  const std::vector<double> y{0.5, 0.3, 0.2};
  // the first two classes: 0.25 * 0.8
  EXPECT_NEAR(candidate_mass(std::vector<std::uint8_t>{1, 1, 0}, y), 0.2, 1e-15);
  EXPECT_EQ(candidate_mass(std::vector<std::uint8_t>{0, 0, 0}, y), 0.0);
  const LogCandidateMass empty = log_candidate_mass(std::vector<std::uint8_t>{0, 0, 0}, y);
  EXPECT_TRUE(empty.degenerate);
  EXPECT_NEAR(empty.value, std::log(kCandidateFloor) - 2 * std::numbers::ln2, 1e-12);
  const LogCandidateMass ok = log_candidate_mass(std::vector<std::uint8_t>{1, 1, 0}, y);
  EXPECT_FALSE(ok.degenerate);
  EXPECT_NEAR(ok.value, std::log(0.2), 1e-15);
  EXPECT_THROW(candidate_mass(std::vector<std::uint8_t>{1, 0}, y), ShapeError);
}

TEST(CandidateMass, SumsToOneOverAllSubsets) {
  Rng rng(1);
  for (std::size_t k = 1; k <= 12; ++k) {
    for (int t = 0; t < 100; ++t) {
      const std::vector<double> y = random_simplex(k, rng);
      double total = 0.0;
      for (std::size_t bits = 0; bits < (std::size_t{1} << k); ++bits) total += candidate_mass(subset_mask(bits, k), y);
      ASSERT_NEAR(total, 1.0, 1e-9) << "k " << k;
    }
  }
}

TEST(CandidateMass, TapeMatchesScalarAndGradient) {
  Rng rng(2);
  const std::size_t n = 6, k = 4;
  Tensor y(Shape{n, k}), mask(Shape{n, k});
  for (std::size_t r = 0; r < n; ++r) {
    const auto p = random_simplex(k, rng);
    std::copy(p.begin(), p.end(), y.row_span(r).begin());
    mask.at(r, rng.below(k)) = 1.0;
    for (std::size_t j = 0; j < k; ++j)
      if (rng.uniform() < 0.4) mask.at(r, j) = 1.0;
  }
  Tape tape;
  const Tensor out = log_candidate_mass(tape.constant(y), mask).value();
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::uint8_t> s(k);
    for (std::size_t j = 0; j < k; ++j) s[j] = mask.at(r, j) > 0;
    EXPECT_NEAR(out[r], log_candidate_mass(s, y.row_span(r)).value, 1e-14);
  }
  GradCheckOptions o;
  o.tol = 1e-6;
  const auto rep = grad_check([&](Tape&, Var v) { return sum(log_candidate_mass(v, mask)); }, y, o);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

TEST(CandidateMass, ExpectationMatchesMonteCarlo) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t k = 3 + rng.below(4);
    DirichletParams a;
    for (std::size_t j = 0; j < k; ++j) a.alpha.push_back(0.3 + 4.0 * rng.uniform());
    std::vector<std::uint8_t> s = subset_mask(1 + rng.below((std::size_t{1} << k) - 2), k);
    test::Moments mc;
    for (int i = 0; i < 100000; ++i) mc.add(log_candidate_mass(s, sample_dirichlet(a, rng).y).value);
    const double want = expected_log_candidate_mass(s, a.alpha);
    EXPECT_LT(std::fabs(mc.mean - want), 3 * mc.stderr_of_mean()) << "trial " << trial;
  }
  EXPECT_THROW(expected_log_candidate_mass(std::vector<std::uint8_t>{0, 0}, std::vector<double>{1, 1}), DomainError);
}

TEST(CandidateMass, PermutationEquivariant) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.below(6);
    const std::vector<double> y = random_simplex(k, rng);
    std::vector<double> alpha(k), prior(k);
    for (std::size_t j = 0; j < k; ++j) {
      alpha[j] = 1.0 + 3.0 * rng.uniform();
      prior[j] = 1.0 + rng.uniform();
    }
    const auto s = subset_mask(1 + rng.below((std::size_t{1} << k) - 1), k);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<double> py(k), pa(k), pp(k);
    std::vector<std::uint8_t> ps(k);
    for (std::size_t j = 0; j < k; ++j) {
      py[j] = y[perm[j]];
      pa[j] = alpha[perm[j]];
      pp[j] = prior[perm[j]];
      ps[j] = s[perm[j]];
    }
    EXPECT_NEAR(log_candidate_mass(ps, py).value, log_candidate_mass(s, y).value, 1e-14);
    EXPECT_NEAR(expected_log_candidate_mass(ps, pa), expected_log_candidate_mass(s, alpha), 1e-13);
    EXPECT_NEAR(kl_dirichlet({pa}, {pp}), kl_dirichlet({alpha}, {prior}), 1e-12);
  }
}

// ---- importance-weighted log p(x | y) ----------------------------------------------------

// Linear-Gaussian CVAE with d = 3, k = 2, m = 2: decoder mean (z1, z2, 0), sigma 1,
// so x ~ N(0, diag(2, 2, 1)). The encoder proposes N(x_{1:2} / 3, 0.7 I), a
// deliberately imperfect proposal (the exact posterior is N(x / 2, 0.5 I)).
CvaeNets linear_gaussian_toy() {
  Rng rng(0);
  CvaeNets nets(3, 2, 2, 4, rng);
  auto& enc = nets.encoder().layers();
  auto& dec = nets.decoder().layers();
  for (auto* l : {&enc[0], &enc[1], &dec[0], &dec[1]}) {
    for (double& v : l->weight.values()) v = 0.0;
    for (double& v : l->bias.values()) v = 0.0;
  }
  // hidden units hold relu(v), relu(-v) for v in {first, second} input; their difference is v
  auto split = [](DenseLayer& l, std::size_t in0, std::size_t in1) {
    const std::size_t w = l.weight.cols();
    l.weight[in0 * w + 0] = 1.0;
    l.weight[in0 * w + 1] = -1.0;
    l.weight[in1 * w + 2] = 1.0;
    l.weight[in1 * w + 3] = -1.0;
  };
  split(enc[0], 0, 1);  // encoder input is (x, y)
  split(dec[0], 2, 3);  // decoder input is (y, z)
  const double c = 1.0 / 3.0;
  const std::size_t ew = enc[1].weight.cols();
  enc[1].weight[0 * ew + 0] = c;
  enc[1].weight[1 * ew + 0] = -c;
  enc[1].weight[2 * ew + 1] = c;
  enc[1].weight[3 * ew + 1] = -c;
  enc[1].bias[2] = enc[1].bias[3] = std::log(0.7);
  const std::size_t dw = dec[1].weight.cols();
  dec[1].weight[0 * dw + 0] = 1.0;
  dec[1].weight[1 * dw + 0] = -1.0;
  dec[1].weight[2 * dw + 1] = 1.0;
  dec[1].weight[3 * dw + 1] = -1.0;
  nets.sigma = 1.0;
  return nets;
}

double log_normal(double v, double mean, double var) {
  return -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * (v - mean) * (v - mean) / var;
}

double toy_log_marginal(std::span<const double> x) {
  return log_normal(x[0], 0, 2) + log_normal(x[1], 0, 2) + log_normal(x[2], 0, 1);
}

const Pass kFrozen{true, false};

TEST(LogPx, SingleSampleIsOneImportanceWeight) {
  CvaeNets nets = linear_gaussian_toy();
  Rng data(5);
  const Tensor x = random_tensor({4, 3}, data, -2, 2);
  const Tensor y = Tensor::matrix(4, 2, {1, 0, 0, 1, 0.5, 0.5, 1, 0});
  Tape t1;
  Rng r1(9);
  const Tensor got = log_px_given_y(t1, nets, t1.constant(x), t1.constant(y), 1, r1, kFrozen).value();
  // recompute the weight from the same draws with full Gaussian densities
  Tape t2;
  Rng r2(9);
  CvaeOutput o = nets.forward(t2, t2.constant(x), t2.constant(y), r2, kFrozen);
  for (std::size_t r = 0; r < 4; ++r) {
    double w = 0.0;
    for (std::size_t c = 0; c < 3; ++c) w += log_normal(x.at(r, c), o.recon.value().at(r, c), 1.0);
    for (std::size_t c = 0; c < 2; ++c) {
      const double z = o.z.value().at(r, c);
      w += log_normal(z, 0, 1) - log_normal(z, o.mu.value().at(r, c), std::exp(o.log_var.value().at(r, c)));
    }
    EXPECT_NEAR(got[r], w, 1e-12);
  }
}

TEST(LogPx, AggregatesWithLogSumExp) {
  CvaeNets nets = linear_gaussian_toy();
  const Tensor x = Tensor::matrix(1, 3, {1.5, -0.5, 0.25});
  const Tensor y = Tensor::matrix(1, 2, {1, 0});
  Tape t1;
  Rng r1(10);
  const double got = log_px_given_y(t1, nets, t1.constant(x), t1.constant(y), 6, r1, kFrozen).value().item();
  Tape t2;
  Rng r2(10);
  Tensor x6(Shape{6, 3}), y6(Shape{6, 2});
  for (std::size_t r = 0; r < 6; ++r) {
    std::copy(x.values().begin(), x.values().end(), x6.row_span(r).begin());
    std::copy(y.values().begin(), y.values().end(), y6.row_span(r).begin());
  }
  const Tensor w = log_px_given_y(t2, nets, t2.constant(x6), t2.constant(y6), 1, r2, kFrozen).value();
  EXPECT_NEAR(got, log_sum_exp(w.values()) - std::log(6.0), 1e-12);
}

TEST(LogPx, LinearGaussianMarginal) {
  CvaeNets nets = linear_gaussian_toy();
  Rng data(11);
  const std::size_t trials = 50;
  Tensor x(Shape{trials, 3});
  for (std::size_t r = 0; r < trials; ++r) {
    x.at(r, 0) = std::sqrt(2.0) * data.normal();
    x.at(r, 1) = std::sqrt(2.0) * data.normal();
    x.at(r, 2) = data.normal();
  }
  const Tensor y(Shape{trials, 2}, 0.5);
  Tape tape;
  Rng rng(12);
  const Tensor est = log_px_given_y(tape, nets, tape.constant(x), tape.constant(y), 1024, rng, kFrozen).value();
  for (std::size_t r = 0; r < trials; ++r) EXPECT_NEAR(est[r], toy_log_marginal(x.row_span(r)), 0.05) << "trial " << r;
}

TEST(LogPx, BoundTightensWithMoreSamples) {
  CvaeNets nets = linear_gaussian_toy();
  const std::size_t trials = 200;
  Tensor x(Shape{trials, 3});
  for (std::size_t r = 0; r < trials; ++r) {
    x.at(r, 0) = 2.0;
    x.at(r, 1) = 2.0;
    x.at(r, 2) = 0.0;
  }
  const Tensor y(Shape{trials, 2}, 0.5);
  Rng rng(13);
  Tape t1, t64;
  const double m1 = mean(log_px_given_y(t1, nets, t1.constant(x), t1.constant(y), 1, rng, kFrozen)).value().item();
  const double m64 = mean(log_px_given_y(t64, nets, t64.constant(x), t64.constant(y), 64, rng, kFrozen)).value().item();
  EXPECT_LE(m1, m64);
  EXPECT_LE(m64, toy_log_marginal(x.row_span(0)) + 0.05);
  EXPECT_THROW(log_px_given_y(t1, nets, t1.constant(x), t1.constant(y), 0, rng, kFrozen), std::invalid_argument);
}

// ---- beta-ELBO ------------------------------------------------------------------------

struct Toy {
  PLLDataset ds;
  Tensor features;
  ClassifierNet classifier;
  CvaeNets cvae;
  Tensor prior_alpha;
};

Toy make_toy(std::size_t n, std::uint64_t seed, double full_set_rate = 0.0) {
  Rng rng(seed);
  Toy t;
  t.ds.n = n;
  t.ds.d = 4;
  t.ds.k = 3;
  t.ds.true_labels.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 4; ++c) t.ds.features.push_back(2 * rng.uniform() - 1);
    const int y = static_cast<int>(rng.below(3));
    t.ds.true_labels->push_back(y);
    const bool full = rng.uniform() < full_set_rate;
    for (int j = 0; j < 3; ++j) t.ds.candidates.push_back(full || j == y || rng.uniform() < 0.4 ? 1 : 0);
  }
  t.features = Tensor(Shape{n, 4}, t.ds.features);
  t.classifier = ClassifierNet(4, 3, 8, rng);
  t.cvae = CvaeNets(4, 3, 2, 8, rng);
  t.prior_alpha = Tensor(Shape{3}, std::vector<double>{1.4, 1.0, 1.2});
  return t;
}

ElboResult run_elbo(Toy& toy, const Batch& batch, const ElboOptions& opt, std::uint64_t seed, Tape& tape) {
  Rng rng(seed);
  return beta_elbo_batch(tape, toy.classifier, toy.cvae, toy.prior_alpha, batch, opt, rng);
}

TEST(Elbo, TotalRecomposesAndKlNonNegative) {
  Toy toy = make_toy(16, 20);
  const auto ids = all_indices(16);
  const Batch batch = make_batch(toy.ds, toy.features, ids);
  ElboOptions opt;
  opt.b = 3;
  opt.b_prime = 2;
  opt.beta = 0.7;
  Tape tape;
  const ElboResult r = run_elbo(toy, batch, opt, 1, tape);
  const ElboBreakdown& e = r.terms;
  EXPECT_EQ(e.total, e.generative_term + e.candidate_term - e.beta * e.kl_term);
  EXPECT_GE(e.kl_term, 0.0);
  EXPECT_NEAR(r.loss.value().item(), -e.total, 1e-12);
  EXPECT_LE(e.candidate_term, 0.0);
  EXPECT_EQ(r.alpha.rows(), 16u);
}

TEST(Elbo, BetaScalesOnlyTheKlTerm) {
  Toy toy = make_toy(12, 21);
  const auto ids = all_indices(12);
  const Batch batch = make_batch(toy.ds, toy.features, ids);
  ElboOptions opt;
  opt.b = 2;
  opt.b_prime = 2;
  opt.beta = 0.5;
  Tape ta, tb;
  const ElboBreakdown a = run_elbo(toy, batch, opt, 7, ta).terms;
  opt.beta = 1.0;
  const ElboBreakdown b = run_elbo(toy, batch, opt, 7, tb).terms;
  EXPECT_EQ(a.generative_term, b.generative_term);
  EXPECT_EQ(a.candidate_term, b.candidate_term);
  EXPECT_EQ(a.kl_term, b.kl_term);
  EXPECT_NEAR(b.total - a.total, -0.5 * a.kl_term, 1e-12);
}

TEST(Elbo, SingleInstanceEqualsHandComposition) {
  Toy toy = make_toy(5, 22);
  const std::vector<std::size_t> one{3};
  const Batch batch = make_batch(toy.ds, toy.features, one);
  ElboOptions opt;
  opt.b = 1;
  opt.b_prime = 1;
  opt.classifier_pass = Pass{false, true};
  Tape tape;
  const ElboBreakdown e = run_elbo(toy, batch, opt, 8, tape).terms;

  Tape t;
  Rng rng(8);
  Var x = t.constant(batch.x);
  Var alpha = toy.classifier.alpha(t, x, t.constant(batch.mask), opt.classifier_pass);
  Var y = sample_dirichlet(alpha, 1, rng);
  const double cand = log_candidate_mass(y, batch.mask).value().item();
  const double gen = log_px_given_y(t, toy.cvae, x, y, 1, rng, opt.cvae_pass).value().item();
  const DirichletParams q{{alpha.value().values().begin(), alpha.value().values().end()}};
  const DirichletParams p{{toy.prior_alpha.values().begin(), toy.prior_alpha.values().end()}};
  EXPECT_EQ(e.candidate_term, cand);
  EXPECT_EQ(e.generative_term, gen);
  EXPECT_NEAR(e.kl_term, kl_dirichlet(q, p), 1e-13);
  EXPECT_NEAR(e.total, gen + cand - kl_dirichlet(q, p), 1e-12);
}

TEST(Elbo, CandidateTermMatchesClosedForm) {
  Toy toy = make_toy(20, 23);
  // an instance whose candidate set is a proper subset, so the term is random
  std::size_t pick = 0;
  while (toy.ds.candidate_count(pick) == 3) ++pick;
  ASSERT_LT(pick, toy.ds.n);
  const std::vector<std::size_t> one{pick};
  const Batch batch = make_batch(toy.ds, toy.features, one);
  ElboOptions opt;
  opt.b = 100000;
  opt.b_prime = 1;
  opt.classifier_pass = Pass{false, true};
  Tape tape;
  const ElboResult r = run_elbo(toy, batch, opt, 9, tape);
  const std::vector<double> alpha(r.alpha.values().begin(), r.alpha.values().end());
  const auto s = toy.ds.s(pick);
  // spread of the per-sample term from an independent scalar run
  Rng rng(99);
  test::Moments spread;
  for (int i = 0; i < 20000; ++i) spread.add(log_candidate_mass(s, sample_dirichlet({alpha}, rng).y).value);
  const double se = std::sqrt(spread.variance() / 100000.0);
  EXPECT_LT(std::fabs(r.terms.candidate_term - expected_log_candidate_mass(s, alpha)), 3 * se);
}

TEST(Elbo, GradientsMatchFiniteDifferences) {
  Toy toy = make_toy(6, 24);
  const auto ids = all_indices(6);
  const Batch batch = make_batch(toy.ds, toy.features, ids);
  ElboOptions opt;
  opt.b = 2;
  opt.b_prime = 2;
  opt.sampler = DirichletSampler::inverse_cdf;
  opt.cvae_pass = Pass{true, true};
  // common random numbers: the same seed for every perturbed evaluation
  auto build = [&](Tape& t) { return run_elbo(toy, batch, opt, 17, t).loss; };
  GradCheckOptions o;
  o.tol = 1e-3;
  for (auto params : {toy.classifier.parameters(), toy.cvae.parameters()}) {
    const GradCheckReport r = grad_check_params(build, params, o, 6);
    EXPECT_TRUE(r.passed) << r.max_rel_error;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(Elbo, RejectsEmptyBatch) {
  Toy toy = make_toy(3, 25);
  Batch empty;
  Tape tape;
  Rng rng(0);
  EXPECT_THROW(beta_elbo_batch(tape, toy.classifier, toy.cvae, toy.prior_alpha, empty, ElboOptions{}, rng),
               std::invalid_argument);
  EXPECT_THROW(make_batch(toy.ds, toy.features, std::vector<std::size_t>{}), std::invalid_argument);
}

// ---- label table ----------------------------------------------------------------------------

PLLDataset three_rows() {
  PLLDataset ds;
  ds.n = 3;
  ds.d = 1;
  ds.k = 3;
  ds.features = {0, 0, 0};
  ds.candidates = {1, 1, 0, 0, 1, 0, 1, 1, 1};
  return ds;
}

TEST(LabelTable, InitialRowsUniformOverCandidates) {
  const LabelTable t(three_rows());
  EXPECT_EQ(std::vector<double>(t.row(0).begin(), t.row(0).end()), (std::vector<double>{0.5, 0.5, 0}));
  EXPECT_EQ(t.row(1)[1], 1.0);
  EXPECT_NEAR(t.row(2)[2], 1.0 / 3, 1e-16);
  EXPECT_EQ(t.off_support_mass(), 0.0);
  EXPECT_LT(t.max_sum_error(), 1e-15);
}

TEST(LabelTable, UpdateExamples) {
  LabelTable t(three_rows());
  const std::vector<std::size_t> ids{0, 1, 2};
  t.update(ids, Tensor::matrix(3, 3, {2, 1, 1, 5, 3, 9, 1.7, 1.7, 1.7}));
  EXPECT_NEAR(t.row(0)[0], 2.0 / 3, 1e-15);
  EXPECT_NEAR(t.row(0)[1], 1.0 / 3, 1e-15);
  EXPECT_EQ(t.row(0)[2], 0.0);
  EXPECT_EQ(t.row(1)[0], 0.0);
  EXPECT_EQ(t.row(1)[1], 1.0);
  EXPECT_EQ(t.row(1)[2], 0.0);
  for (double v : t.row(2)) EXPECT_NEAR(v, 1.0 / 3, 1e-15);
  EXPECT_THROW(t.update(std::vector<std::size_t>{7}, Tensor(Shape{1, 3}, 1.0)), std::out_of_range);
  EXPECT_THROW(t.gather(std::vector<std::size_t>{3}), std::out_of_range);
}

TEST(LabelTable, RandomUpdatesKeepInvariants) {
  Toy toy = make_toy(50, 26);
  LabelTable t(toy.ds);
  Rng rng(27);
  for (int round = 0; round < 20; ++round) {
    std::vector<std::size_t> ids;
    for (int i = 0; i < 10; ++i) ids.push_back(rng.below(50));
    t.update(ids, random_tensor({10, 3}, rng, 1.0, 30.0));
    EXPECT_LT(t.max_sum_error(), 1e-9);
    EXPECT_EQ(t.off_support_mass(), 0.0);
  }
}

// ---- ablation ----------------------------------------------------------------------------

TEST(Ablation, KlVanishesWhenPosteriorMatchesTable) {
  Toy toy = make_toy(8, 28, 1.0);  // every candidate set is the full label set
  toy.classifier.mlp().zero_output_layer();  // alpha = 1 + ln 2 everywhere
  const LabelTable table(toy.ds);             // uniform rows 1/3
  const Batch batch = make_batch(toy.ds, toy.features, all_indices(8));
  Tape tape;
  Rng rng(1);
  const AblationResult r = ablation_loss(tape, toy.classifier, table, batch, 4, 3 * std::numbers::ln2, rng);
  EXPECT_NEAR(r.kl_term, 0.0, 1e-12);
  EXPECT_NEAR(r.total, -r.candidate_term, 1e-12);
}

TEST(Ablation, CandidateTermSharedWithElbo) {
  Toy toy = make_toy(10, 29);
  const LabelTable table(toy.ds);
  const Batch batch = make_batch(toy.ds, toy.features, all_indices(10));
  ElboOptions opt;
  opt.b = 3;
  Tape t1, t2;
  const ElboResult e = run_elbo(toy, batch, opt, 5, t1);
  Rng rng(5);
  const AblationResult a = ablation_loss(t2, toy.classifier, table, batch, 3, 10.0, rng);
  EXPECT_EQ(a.candidate_term, e.terms.candidate_term);
  EXPECT_GE(a.kl_term, 0.0);
  EXPECT_EQ(a.total, a.kl_term - a.candidate_term);
}

TEST(Ablation, UnknownInstanceRejected) {
  Toy toy = make_toy(4, 30);
  const LabelTable table(toy.ds);
  Batch batch = make_batch(toy.ds, toy.features, all_indices(4));
  batch.ids[2] = 40;
  Tape tape;
  Rng rng(0);
  EXPECT_THROW(ablation_loss(tape, toy.classifier, table, batch, 2, 10.0, rng), std::out_of_range);
}

TEST(Ablation, GradientsMatchFiniteDifferences) {
  Toy toy = make_toy(6, 31);
  LabelTable table(toy.ds);
  Rng r(2);
  table.update(all_indices(6), random_tensor({6, 3}, r, 1.0, 5.0));
  const Batch batch = make_batch(toy.ds, toy.features, all_indices(6));
  auto build = [&](Tape& t) {
    Rng rng(3);
    return ablation_loss(t, toy.classifier, table, batch, 2, 10.0, rng, DirichletSampler::inverse_cdf).loss;
  };
  GradCheckOptions o;
  o.tol = 1e-3;
  const GradCheckReport rep = grad_check_params(build, toy.classifier.parameters(), o, 6);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

}  // namespace
}  // namespace pllvi
