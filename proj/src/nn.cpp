#include "pllvi/nn.hpp"

#include <cmath>

namespace pllvi {

Var bind(Tape& tape, Tensor& param, const Pass& pass) {
  if (pass.trainable) return tape.leaf(param);
  return tape.constant(param);
}

Mlp::Mlp(const std::vector<std::size_t>& widths, bool batch_norm, Rng& rng)
    : widths_(widths), batch_norm_(batch_norm) {
  if (widths_.size() < 2) throw ShapeError("Mlp", "needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t in = widths_[l], out = widths_[l + 1];
    DenseLayer layer;
    layer.weight = Tensor(Shape{in, out});
    layer.bias = Tensor(Shape{1, out});
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> init(-bound, bound);
    for (double& w : layer.weight.values()) w = init(rng.engine());
    layer.weight.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    const bool hidden = l + 2 < widths_.size();
    if (hidden && batch_norm_) {
      BatchNormLayer bn{Tensor(Shape{1, out}, 1.0), Tensor(Shape{1, out}, 0.0), BatchNormStats(out)};
      bn.gamma.set_requires_grad(true);
      bn.beta.set_requires_grad(true);
      layer.norm = std::move(bn);
    }
    layers_.push_back(std::move(layer));
  }
}

Var Mlp::forward(Tape& tape, Var x, const Pass& pass) {
  if (x.value().cols() != in_features())
    throw ShapeError("Mlp::forward", x.shape(), Shape{x.value().rows(), in_features()});
  Var h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    DenseLayer& layer = layers_[l];
    h = matmul(h, bind(tape, layer.weight, pass)) + bind(tape, layer.bias, pass);
    if (l + 1 == layers_.size()) break;
    if (layer.norm) {
      BatchNormLayer& bn = *layer.norm;
      h = pllvi::batch_norm(h, bind(tape, bn.gamma, pass), bind(tape, bn.beta, pass), bn.stats, pass.training);
    }
    h = relu(h);
  }
  return h;
}

std::vector<NamedParam> Mlp::parameters(const std::string& prefix) {
  std::vector<NamedParam> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string base = prefix + ".layer" + std::to_string(l);
    out.push_back({base + ".weight", &layers_[l].weight});
    out.push_back({base + ".bias", &layers_[l].bias});
    if (layers_[l].norm) {
      out.push_back({base + ".bn.gamma", &layers_[l].norm->gamma});
      out.push_back({base + ".bn.beta", &layers_[l].norm->beta});
    }
  }
  return out;
}

void Mlp::zero_output_layer() {
  DenseLayer& last = layers_.back();
  for (double& w : last.weight.values()) w = 0.0;
  for (double& b : last.bias.values()) b = 0.0;
}

}  // namespace pllvi
