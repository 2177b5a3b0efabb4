#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "pllvi/autodiff.hpp"

namespace pllvi {

struct NamedParam {
  std::string name;
  Tensor* tensor = nullptr;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created for the parameters
// given at construction and must keep matching their shapes.
class Adam {
 public:
  Adam(std::vector<NamedParam> params, AdamConfig config);

  // Applies one update from the parameters' accumulated grads. A NaN or inf
  // gradient raises NumericError naming the parameter; nothing is modified
  // in that case.
  void step();
  void zero_grad();

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<NamedParam>& params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<NamedParam> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-6;
  // rel_err = |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double floor = 1e-3;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = true;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::vector<std::string> notes;  // e.g. "nondifferentiable sample skipped: x[3]"
};

// f builds a scalar on the tape from the leaf bound to the point.
using ScalarFn = std::function<Var(Tape&, Var)>;
GradCheckReport grad_check(const ScalarFn& f, const Tensor& point, const GradCheckOptions& options);

// Checks d(loss)/d(param) for the given parameters; build() must bind them
// with Tape::leaf and be deterministic (fixed RNG seed inside).
// max_coords limits the number of coordinates checked per parameter (0 = all),
// picked evenly spaced.
GradCheckReport grad_check_params(const std::function<Var(Tape&)>& build, const std::vector<NamedParam>& params,
                                  const GradCheckOptions& options, std::size_t max_coords = 0);

}  // namespace pllvi
