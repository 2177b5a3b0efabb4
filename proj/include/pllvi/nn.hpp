#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pllvi/autodiff.hpp"
#include "pllvi/optim.hpp"
#include "pllvi/rng.hpp"

namespace pllvi {

// How a forward pass binds parameters and batch-norm state.
struct Pass {
  bool training = true;   // batch statistics + running-stat updates vs running stats
  bool trainable = true;  // parameters as gradient leaves vs constants
};

struct BatchNormLayer {
  Tensor gamma;  // [1, c]
  Tensor beta;   // [1, c]
  BatchNormStats stats;
};

struct DenseLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [1, out]
  std::optional<BatchNormLayer> norm;
};

// Fully connected net: hidden layers are Linear -> [BatchNorm] -> ReLU, the
// last layer is Linear with no activation.
class Mlp {
 public:
  Mlp() = default;
  // widths = {in, hidden..., out}. Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  Mlp(const std::vector<std::size_t>& widths, bool batch_norm, Rng& rng);

  Var forward(Tape& tape, Var x, const Pass& pass);

  std::size_t in_features() const { return widths_.front(); }
  std::size_t out_features() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  bool batch_norm() const { return batch_norm_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<NamedParam> parameters(const std::string& prefix);
  void zero_output_layer();

 private:
  std::vector<std::size_t> widths_;
  bool batch_norm_ = false;
  std::vector<DenseLayer> layers_;
};

// Binds a parameter according to the pass.
Var bind(Tape& tape, Tensor& param, const Pass& pass);

}  // namespace pllvi
