#include "pllvi/optim.hpp"

#include <algorithm>
#include <cmath>

namespace pllvi {

Adam::Adam(std::vector<NamedParam> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw DomainError("Adam", "learning rate must be positive");
  for (const NamedParam& p : params_) {
    if (!p.tensor->requires_grad()) p.tensor->set_requires_grad(true);
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step() {
  for (const NamedParam& p : params_) {
    for (double g : *p.tensor->grad())
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient for parameter '" + p.name + "'");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& w = *params_[k].tensor;
    const std::vector<double>& g = *w.grad();
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (const NamedParam& p : params_) p.tensor->zero_grad();
}

namespace {

struct CoordinateResult {
  double numeric = 0.0;
  bool kink = false;
};

// Five-point probe around the current value: the central difference at step h
// plus a kink test on the four one-sided slopes. For a smooth function the
// consecutive slope differences agree to O(h^2 f'''); a slope jump inside the
// stencil breaks that.
template <class Eval>
CoordinateResult probe(double& coord, double f0, double h, double threshold_scale, Eval eval) {
  const double x0 = coord;
  auto at = [&](double x) {
    coord = x;
    const double v = eval();
    coord = x0;
    return v;
  };
  const double fm2 = at(x0 - 2 * h), fm1 = at(x0 - h), fp1 = at(x0 + h), fp2 = at(x0 + 2 * h);
  CoordinateResult r;
  r.numeric = (fp1 - fm1) / (2 * h);
  const double s_m2 = (fm1 - fm2) / h, s_m1 = (f0 - fm1) / h, s_p1 = (fp1 - f0) / h, s_p2 = (fp2 - fp1) / h;
  const double d1 = s_m1 - s_m2, d2 = s_p1 - s_m1, d3 = s_p2 - s_p1;
  const double spread = std::max({std::fabs(d1 - d2), std::fabs(d2 - d3), std::fabs(d1 - d3)});
  r.kink = spread > threshold_scale;
  return r;
}

void score(GradCheckReport& report, double analytic, const CoordinateResult& r, const GradCheckOptions& o,
           const std::string& label) {
  if (r.kink) {
    ++report.skipped;
    report.notes.push_back("nondifferentiable sample skipped: " + label);
    return;
  }
  ++report.checked;
  const double denom = std::max({std::fabs(analytic), std::fabs(r.numeric), o.floor});
  const double rel = std::fabs(analytic - r.numeric) / denom;
  report.max_rel_error = std::max(report.max_rel_error, rel);
  if (!(rel <= o.tol)) report.passed = false;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const Tensor& point, const GradCheckOptions& options) {
  GradCheckReport report;
  Tensor x = point;
  x.set_requires_grad(true);
  x.zero_grad();
  double f0;
  {
    Tape tape;
    Var root = f(tape, tape.leaf(x));
    f0 = root.value().item();
    tape.backward(root);
  }
  const std::vector<double> analytic = *x.grad();
  Tensor probe_point = point;
  auto eval = [&] {
    Tape tape;
    return f(tape, tape.constant(probe_point)).value().item();
  };
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double thr = options.tol * std::max({std::fabs(analytic[i]), options.floor});
    const CoordinateResult r = probe(probe_point[i], f0, options.h, thr, eval);
    score(report, analytic[i], r, options, "x[" + std::to_string(i) + "]");
  }
  return report;
}

GradCheckReport grad_check_params(const std::function<Var(Tape&)>& build, const std::vector<NamedParam>& params,
                                  const GradCheckOptions& options, std::size_t max_coords) {
  GradCheckReport report;
  for (const NamedParam& p : params) {
    p.tensor->set_requires_grad(true);
    p.tensor->zero_grad();
  }
  double f0;
  {
    Tape tape;
    Var root = build(tape);
    f0 = root.value().item();
    tape.backward(root);
  }
  std::vector<std::vector<double>> analytic;
  for (const NamedParam& p : params) analytic.push_back(*p.tensor->grad());
  auto eval = [&] {
    Tape tape;
    return build(tape).value().item();
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = *params[k].tensor;
    const std::size_t n = w.size();
    const std::size_t count = max_coords == 0 ? n : std::min(n, max_coords);
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = count == n ? c : (c * n) / count;
      const double thr = options.tol * std::max({std::fabs(analytic[k][i]), options.floor});
      const CoordinateResult r = probe(w[i], f0, options.h, thr, eval);
      score(report, analytic[k][i], r, options, params[k].name + "[" + std::to_string(i) + "]");
    }
  }
  return report;
}

}  // namespace pllvi
