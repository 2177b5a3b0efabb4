#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pllvi {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Operand shapes are incompatible for the named op.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& a, const Shape& b);
  ShapeError(const std::string& op, const std::string& what);
};

// Argument outside an op's domain (log of a non-positive value, ...).
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& op, const std::string& what);
};

// A forward op produced a non-finite value from finite inputs, or a loss went NaN.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major array of doubles. Rank 0 (scalar), 1 and 2 are what the ops
// in this library use; rank-1 tensors behave as row vectors under broadcasting.
class Tensor {
 public:
  Tensor() : shape_{}, values_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
  static Tensor row(std::span<const double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  // Rank-2 view: scalars are 1x1, vectors are 1xN.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double item() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row_span(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols(), cols()}; }

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool on);
  // Present iff requires_grad; same shape as the values.
  std::optional<std::vector<double>>& grad() { return grad_; }
  const std::optional<std::vector<double>>& grad() const { return grad_; }
  void zero_grad();

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

}  // namespace pllvi
