#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>

#include "pllvi/optim.hpp"
#include "support.hpp"

namespace pllvi {
namespace {

void set_grad(Tensor& w, double g) {
  w.set_requires_grad(true);
  for (double& v : *w.grad()) v = g;
}

TEST(Adam, FirstStepIsMinusLrTimesSign) {
  Tensor w(Shape{3}, 2.0);
  Adam adam({{"w", &w}}, AdamConfig{});
  set_grad(w, 5.0);
  adam.step();
  // m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps)
  const double expected = 2.0 - 1e-3 * 5.0 / (5.0 + 1e-8);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(w[i], expected, 1e-15);
  EXPECT_NEAR(w[0] - 2.0, -1e-3, 1e-11);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, MatchesHandRecurrence) {
  Tensor w = Tensor::scalar(0.5);
  AdamConfig cfg{0.01, 0.8, 0.95, 1e-8};
  Adam adam({{"w", &w}}, cfg);
  double m = 0, v = 0, x = 0.5;
  const double grads[] = {1.0, -3.0, 0.25, 2.0};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    set_grad(w, g);
    adam.step();
    m = 0.8 * m + 0.2 * g;
    v = 0.95 * v + 0.05 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.8, t))) / (std::sqrt(v / (1 - std::pow(0.95, t))) + 1e-8);
    EXPECT_NEAR(w[0], x, 1e-15);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor w(Shape{2, 2}, 1.25);
  Adam adam({{"w", &w}}, AdamConfig{});
  set_grad(w, 0.0);
  adam.step();
  adam.step();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w[i], 1.25);
}

TEST(Adam, ConstantGradientMovesMonotonically) {
  Tensor w = Tensor::scalar(0.0);
  Adam adam({{"w", &w}}, AdamConfig{});
  double prev = 0.0;
  for (int i = 0; i < 2; ++i) {
    set_grad(w, -2.0);
    adam.step();
    EXPECT_GT(w[0], prev);
    prev = w[0];
  }
}

TEST(Adam, NanGradientNamesParameterAndLeavesState) {
  Tensor a = Tensor::scalar(1.0), b = Tensor::scalar(1.0);
  Adam adam({{"layer0.weight", &a}, {"layer0.bias", &b}}, AdamConfig{});
  set_grad(a, 1.0);
  set_grad(b, std::numeric_limits<double>::quiet_NaN());
  try {
    adam.step();
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer0.bias"), std::string::npos) << e.what();
  }
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(Adam, RejectsNonPositiveLr) {
  Tensor w = Tensor::scalar(0.0);
  EXPECT_THROW(Adam({{"w", &w}}, AdamConfig{0.0}), DomainError);
}

TEST(Adam, MomentBuffersMatchShapes) {
  Tensor a(Shape{3, 4}), b(Shape{1, 4});
  Adam adam({{"a", &a}, {"b", &b}}, AdamConfig{});
  ASSERT_EQ(adam.first_moments().size(), 2u);
  EXPECT_EQ(adam.first_moments()[0].size(), 12u);
  EXPECT_EQ(adam.second_moments()[1].size(), 4u);
}

TEST(GradCheck, SumOfSquares) {
  Rng rng(1);
  const Tensor x = test::random_tensor({10}, rng, -2, 2);
  GradCheckOptions o;
  o.tol = 1e-7;
  const GradCheckReport r = grad_check([](Tape&, Var v) { return sum(square(v)); }, x, o);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_LT(r.max_rel_error, 1e-7);
  EXPECT_EQ(r.checked, 10u);
}

TEST(GradCheck, SumOfLogs) {
  Rng rng(2);
  const Tensor x = test::random_tensor({10}, rng, 0.5, 3);
  GradCheckOptions o;
  o.tol = 1e-5;
  const GradCheckReport r = grad_check([](Tape&, Var v) { return sum(log(v)); }, x, o);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(GradCheck, ReluKinkIsFlaggedAndSkipped) {
  Tensor x(Shape{3}, std::vector<double>{0.0, 1.0, -1.0});
  const GradCheckReport r = grad_check([](Tape&, Var v) { return sum(relu(v)); }, x, GradCheckOptions{});
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_TRUE(r.passed);
  ASSERT_EQ(r.notes.size(), 1u);
  EXPECT_NE(r.notes[0].find("nondifferentiable sample skipped"), std::string::npos);
}

TEST(GradCheck, WrongGradientFails) {
  // A hand-made op whose backward is off by a factor of two.
  auto bad = [](Tape& tape, Var v) {
    Tensor out = v.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * out[i];
    Var sq = tape.record("bad_square", out, {v}, [](Tape& t, std::size_t id) {
      const std::size_t in = t.input(id, 0);
      const Tensor& x = t.value(in);
      auto g = t.grad(id);
      auto gi = t.grad(in);
      for (std::size_t i = 0; i < x.size(); ++i) gi[i] += g[i] * 4.0 * x[i];
    });
    return sum(sq);
  };
  const GradCheckReport r = grad_check(bad, Tensor(Shape{2}, std::vector<double>{1.0, -2.0}), GradCheckOptions{});
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_rel_error, 0.5, 1e-6);
}

}  // namespace
}  // namespace pllvi
