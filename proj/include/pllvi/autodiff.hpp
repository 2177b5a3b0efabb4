#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "pllvi/tensor.hpp"

namespace pllvi {

class Tape;

// Handle to a node on a Tape. Cheap to copy; invalid after Tape::clear().
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool needs_grad() const;
};

struct BackwardReport {
  enum class Status { ok, detached };
  Status status = Status::ok;
  // Leaves (bound parameters) that received a gradient.
  std::vector<const Tensor*> updated;
};

// Records forward ops in construction order; backward walks them in reverse.
//
// Nodes that do not depend on any gradient-requiring leaf are stored as
// constants without a backward closure. Every recorded value is checked for
// finiteness; an op that turns finite inputs into inf/NaN raises NumericError.
class Tape {
 public:
  // Called once during backward with the node's own id; must accumulate into
  // the grads of the node's inputs via Tape::grad().
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter. If param.requires_grad(), backward adds
  // d(root)/d(param) into param.grad(); otherwise this is a constant.
  Var leaf(Tensor& param);
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, allocated (zeroed) on first use.
  std::span<double> grad(std::size_t id);
  std::size_t input(std::size_t id, std::size_t slot) const { return nodes_[id].inputs[slot]; }

  // root must be a scalar. Accumulates into bound parameters, then clears the tape.
  BackwardReport backward(Var root);
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor* bound = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise binary ops -------------------------------------------------
// Broadcasting (rank <= 2): a rank-1 tensor of length c is a 1 x c row, a
// scalar is 1 x 1. Two operands are compatible when each dimension is either
// equal or 1 on one side; the result takes the larger extent.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }

// ---- elementwise unary ops --------------------------------------------------
Var neg(Var a);
Var scale(Var a, double c);
Var shift(Var a, double c);
Var relu(Var a);  // subgradient 0 at exactly 0
Var softplus(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);      // DomainError for non-positive entries
Var lgamma(Var a);   // DomainError for non-positive entries
Var digamma(Var a);  // DomainError for non-positive entries
Var square(Var a);
// Saturating clamp; gradient passes only where lo < a < hi (or equal to a bound
// that is not active).
Var clamp(Var a, double lo, double hi);

inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator+(Var a, double c) { return shift(a, c); }
inline Var operator+(double c, Var a) { return shift(a, c); }
inline Var operator-(Var a, double c) { return shift(a, -c); }

// ---- reductions ---------------------------------------------------------------
Var sum(Var a);            // -> scalar
Var mean(Var a);           // -> scalar
Var sum_rows(Var a);       // [r, c] -> [r, 1]
Var sum_cols(Var a);       // [r, c] -> [1, c]
Var logsumexp_rows(Var a); // [r, c] -> [r, 1], max-shifted

// ---- structure ------------------------------------------------------------------
Var matmul(Var a, Var b);                                  // [m, k] x [k, n]
Var concat(Var a, Var b, std::size_t axis = 1);            // rank-2 operands
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var repeat_rows(Var a, std::size_t times);                 // row i -> rows i*times .. i*times+times-1
Var reshape(Var a, Shape shape);
Var broadcast_to(Var a, Shape shape);

// ---- batch normalization ----------------------------------------------------------
struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;  // running <- momentum * running + (1 - momentum) * batch
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t features = 0)
      : running_mean(features, 0.0), running_var(features, 1.0) {}
};

// x: [n, c]; gamma, beta: [1, c]. Training mode normalizes with the batch
// statistics (biased variance) and updates the running stats (unbiased
// variance); inference mode uses the running stats.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool training);

}  // namespace pllvi
