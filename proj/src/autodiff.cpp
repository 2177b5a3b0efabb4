#include "pllvi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pllvi/kernels.hpp"
#include "pllvi/special.hpp"

namespace pllvi {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::needs_grad() const { return tape->needs_grad(id); }

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor& param) {
  Node n;
  n.op = "leaf";
  n.value = param;
  if (param.requires_grad()) {
    n.bound = &param;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  if (!value.all_finite()) {
    std::string shapes;
    for (const Var& v : inputs) shapes += (shapes.empty() ? "" : ", ") + shape_str(v.shape());
    throw NumericError(std::string(op) + ": non-finite output from inputs of shape " + shapes);
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    n.inputs.push_back(v.id);
    n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

std::span<double> Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

BackwardReport Tape::backward(Var root) {
  if (root.value().size() != 1) throw ShapeError("backward", "root must be a scalar, got " + shape_str(root.shape()));
  BackwardReport report;
  if (!nodes_[root.id].needs_grad) {
    report.status = BackwardReport::Status::detached;
    clear();
    return report;
  }
  grad(root.id)[0] = 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.bound) {
      auto& g = *n.bound->grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      report.updated.push_back(n.bound);
    }
  }
  clear();
  return report;
}

namespace {

struct Broadcast {
  std::size_t rows, cols;
  std::size_t ra, ca, rb, cb;
  Shape shape;
};

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() > 2) throw ShapeError(op, "rank > 2 is not supported, got " + shape_str(t.shape()));
}

Broadcast broadcast_shapes(const char* op, const Tensor& a, const Tensor& b) {
  require_rank2(op, a);
  require_rank2(op, b);
  Broadcast bc{0, 0, a.rows(), a.cols(), b.rows(), b.cols(), {}};
  auto join = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(op, a.shape(), b.shape());
  };
  bc.rows = join(bc.ra, bc.rb);
  bc.cols = join(bc.ca, bc.cb);
  const std::size_t rank = std::max(a.rank(), b.rank());
  if (rank == 2) bc.shape = {bc.rows, bc.cols};
  else if (rank == 1) bc.shape = {bc.cols};
  return bc;
}

inline std::size_t bidx(std::size_t i, std::size_t j, std::size_t r, std::size_t c) {
  return (r == 1 ? 0 : i) * c + (c == 1 ? 0 : j);
}

// Same-shape operands skip the broadcast index map.
inline bool same_extent(const Broadcast& bc) {
  return bc.ra == bc.rows && bc.ca == bc.cols && bc.rb == bc.rows && bc.cb == bc.cols;
}

// out = f(a, b) elementwise with broadcasting; the backward closure receives
// the upstream gradient and adds da * g, db * g through the same index map.
template <class F, class DA, class DB>
Var binary(const char* op, Var a, Var b, F f, DA da, DB db) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast bc = broadcast_shapes(op, av, bv);
  Tensor out(bc.shape);
  if (same_extent(bc)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < bc.rows; ++i)
      for (std::size_t j = 0; j < bc.cols; ++j)
        out[i * bc.cols + j] = f(av[bidx(i, j, bc.ra, bc.ca)], bv[bidx(i, j, bc.rb, bc.cb)]);
  }
  return a.tape->record(op, std::move(out), {a, b}, [bc, da, db](Tape& t, std::size_t self) {
    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    const std::span<double> g = t.grad(self);
    const bool flat = same_extent(bc);
    if (t.needs_grad(ia)) {
      std::span<double> gx = t.grad(ia);
      if (flat) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * da(x[i], y[i]);
      } else {
        for (std::size_t i = 0; i < bc.rows; ++i)
          for (std::size_t j = 0; j < bc.cols; ++j) {
            const std::size_t xa = bidx(i, j, bc.ra, bc.ca), yb = bidx(i, j, bc.rb, bc.cb);
            gx[xa] += g[i * bc.cols + j] * da(x[xa], y[yb]);
          }
      }
    }
    if (t.needs_grad(ib)) {
      std::span<double> gy = t.grad(ib);
      if (flat) {
        for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * db(x[i], y[i]);
      } else {
        for (std::size_t i = 0; i < bc.rows; ++i)
          for (std::size_t j = 0; j < bc.cols; ++j) {
            const std::size_t xa = bidx(i, j, bc.ra, bc.ca), yb = bidx(i, j, bc.rb, bc.cb);
            gy[yb] += g[i * bc.cols + j] * db(x[xa], y[yb]);
          }
      }
    }
  });
}

// out = f(a) elementwise; derivative df(x, y) with y = f(x).
template <class F, class DF>
Var unary(const char* op, Var a, F f, DF df) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape->record(op, std::move(out), {a}, [df](Tape& t, std::size_t self) {
    const std::size_t ia = t.input(self, 0);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    const std::span<double> g = t.grad(self);
    std::span<double> gx = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

void require_positive(const char* op, const Tensor& t) {
  for (double v : t.values())
    if (!(v > 0.0)) throw DomainError(op, "argument must be strictly positive, got " + std::to_string(v));
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  for (double v : b.value().values())
    if (v == 0.0) throw DomainError("div", "division by zero");
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var neg(Var a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var shift(Var a, double c) {
  return unary("shift", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var a) {
  return unary(
      "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); },
      [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  require_positive("log", a.value());
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var lgamma(Var a) {
  require_positive("lgamma", a.value());
  return unary("lgamma", a, [](double x) { return special::lgamma(x); },
               [](double x, double) { return special::digamma(x); });
}

Var digamma(Var a) {
  require_positive("digamma", a.value());
  return unary("digamma", a, [](double x) { return special::digamma(x); },
               [](double x, double) { return special::trigamma(x); });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("clamp", "lo must not exceed hi");
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.values()) s += v;
  return a.tape->record("sum", Tensor::scalar(s), {a}, [](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& gx : t.grad(t.input(self, 0))) gx += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  const Tensor& av = a.value();
  require_rank2("sum_rows", av);
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(Shape{r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += av[i * c + j];
    out[i] = s;
  }
  return a.tape->record("sum_rows", std::move(out), {a}, [r, c](Tape& t, std::size_t self) {
    const std::span<double> g = t.grad(self);
    std::span<double> gx = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i];
  });
}

Var sum_cols(Var a) {
  const Tensor& av = a.value();
  require_rank2("sum_cols", av);
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(Shape{1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
  return a.tape->record("sum_cols", std::move(out), {a}, [r, c](Tape& t, std::size_t self) {
    const std::span<double> g = t.grad(self);
    std::span<double> gx = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j];
  });
}

Var logsumexp_rows(Var a) {
  const Tensor& av = a.value();
  require_rank2("logsumexp_rows", av);
  const std::size_t r = av.rows(), c = av.cols();
  if (c == 0) throw ShapeError("logsumexp_rows", "empty rows");
  Tensor out(Shape{r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = av.row_span(i);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    out[i] = m + std::log(s);
  }
  return a.tape->record("logsumexp_rows", std::move(out), {a}, [r, c](Tape& t, std::size_t self) {
    const std::size_t ia = t.input(self, 0);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    const std::span<double> g = t.grad(self);
    std::span<double> gx = t.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i] * std::exp(x[i * c + j] - y[i]);
  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) throw ShapeError("matmul", av.shape(), bv.shape());
  Tensor out(Shape{m, n});
  kernels::gemm_nn(av.values(), bv.values(), out.values(), m, k, n);
  return a.tape->record("matmul", std::move(out), {a, b}, [m, k, n](Tape& t, std::size_t self) {
    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
    const std::span<double> g = t.grad(self);
    if (t.needs_grad(ia)) kernels::gemm_nt(g, t.value(ib).values(), t.grad(ia), m, n, k, true);
    if (t.needs_grad(ib)) kernels::gemm_tn(t.value(ia).values(), g, t.grad(ib), k, m, n, true);
  });
}

Var concat(Var a, Var b, std::size_t axis) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || axis > 1) throw ShapeError("concat", av.shape(), bv.shape());
  if (axis == 0) {
    if (av.cols() != bv.cols()) throw ShapeError("concat", av.shape(), bv.shape());
    const std::size_t na = av.size();
    std::vector<double> v(av.values().begin(), av.values().end());
    v.insert(v.end(), bv.values().begin(), bv.values().end());
    Tensor out(Shape{av.rows() + bv.rows(), av.cols()}, std::move(v));
    return a.tape->record("concat", std::move(out), {a, b}, [na](Tape& t, std::size_t self) {
      const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
      const std::span<double> g = t.grad(self);
      if (t.needs_grad(ia)) {
        std::span<double> gx = t.grad(ia);
        for (std::size_t i = 0; i < na; ++i) gx[i] += g[i];
      }
      if (t.needs_grad(ib)) {
        std::span<double> gy = t.grad(ib);
        for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g[na + i];
      }
    });
  }
  if (av.rows() != bv.rows()) throw ShapeError("concat", av.shape(), bv.shape());
  const std::size_t r = av.rows(), ca = av.cols(), cb = bv.cols(), c = ca + cb;
  Tensor out(Shape{r, c});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(av.values().begin() + i * ca, ca, out.values().begin() + i * c);
    std::copy_n(bv.values().begin() + i * cb, cb, out.values().begin() + i * c + ca);
  }
  return a.tape->record("concat", std::move(out), {a, b}, [r, ca, cb, c](Tape& t, std::size_t self) {
    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
    const std::span<double> g = t.grad(self);
    if (t.needs_grad(ia)) {
      std::span<double> gx = t.grad(ia);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < ca; ++j) gx[i * ca + j] += g[i * c + j];
    }
    if (t.needs_grad(ib)) {
      std::span<double> gy = t.grad(ib);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cb; ++j) gy[i * cb + j] += g[i * c + ca + j];
    }
  });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (av.rank() != 2 || axis > 1) throw ShapeError("slice", "expects a rank-2 tensor and axis 0 or 1, got " + shape_str(av.shape()));
  const std::size_t r = av.rows(), c = av.cols();
  const std::size_t extent = axis == 0 ? r : c;
  if (begin > end || end > extent)
    throw ShapeError("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " + shape_str(av.shape()));
  const std::size_t orows = axis == 0 ? end - begin : r;
  const std::size_t ocols = axis == 1 ? end - begin : c;
  const std::size_t r0 = axis == 0 ? begin : 0, c0 = axis == 1 ? begin : 0;
  Tensor out(Shape{orows, ocols});
  for (std::size_t i = 0; i < orows; ++i)
    for (std::size_t j = 0; j < ocols; ++j) out[i * ocols + j] = av[(r0 + i) * c + c0 + j];
  return a.tape->record("slice", std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const std::span<double> g = t.grad(self);
    std::span<double> gx = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < orows; ++i)
      for (std::size_t j = 0; j < ocols; ++j) gx[(r0 + i) * c + c0 + j] += g[i * ocols + j];
  });
}

Var repeat_rows(Var a, std::size_t times) {
  const Tensor& av = a.value();
  require_rank2("repeat_rows", av);
  if (times == 0) throw ShapeError("repeat_rows", "times must be >= 1");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(Shape{r * times, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t s = 0; s < times; ++s)
      std::copy_n(av.values().begin() + i * c, c, out.values().begin() + (i * times + s) * c);
  return a.tape->record("repeat_rows", std::move(out), {a}, [r, c, times](Tape& t, std::size_t self) {
    const std::span<double> g = t.grad(self);
    std::span<double> gx = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t s = 0; s < times; ++s)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[(i * times + s) * c + j];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape->record("reshape", std::move(out), {a}, [](Tape& t, std::size_t self) {
    const std::span<double> g = t.grad(self);
    std::span<double> gx = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var broadcast_to(Var a, Shape shape) {
  Var target = a.tape->constant(Tensor(std::move(shape), 0.0));
  const Broadcast bc = broadcast_shapes("broadcast_to", a.value(), target.value());
  if (bc.rows != target.value().rows() || bc.cols != target.value().cols())
    throw ShapeError("broadcast_to", a.shape(), target.shape());
  return add(a, target);
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool training) {
  const Tensor& xv = x.value();
  require_rank2("batch_norm", xv);
  const std::size_t n = xv.rows(), c = xv.cols();
  if (gamma.value().size() != c || beta.value().size() != c || stats.running_mean.size() != c)
    throw ShapeError("batch_norm", xv.shape(), gamma.shape());
  if (n == 0) throw ShapeError("batch_norm", "empty batch");

  std::vector<double> mu(c, 0.0), inv_std(c, 0.0);
  if (training) {
    std::vector<double> var(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) mu[j] += xv[i * c + j];
    for (double& m : mu) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xv[i * c + j] - mu[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < c; ++j) {
      const double biased = var[j] / static_cast<double>(n);
      const double unbiased = n > 1 ? var[j] / static_cast<double>(n - 1) : biased;
      inv_std[j] = 1.0 / std::sqrt(biased + stats.eps);
      stats.running_mean[j] = stats.momentum * stats.running_mean[j] + (1.0 - stats.momentum) * mu[j];
      stats.running_var[j] = stats.momentum * stats.running_var[j] + (1.0 - stats.momentum) * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mu[j] = stats.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(stats.running_var[j] + stats.eps);
    }
  }

  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor xhat(Shape{n, c});
  Tensor out(Shape{n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xv[i * c + j] - mu[j]) * inv_std[j];
      xhat[i * c + j] = h;
      out[i * c + j] = gv[j] * h + bv[j];
    }

  return x.tape->record("batch_norm", std::move(out), {x, gamma, beta},
                        [n, c, training, inv_std, xhat = std::move(xhat)](Tape& t, std::size_t self) {
    const std::size_t ix = t.input(self, 0), ig = t.input(self, 1), ib = t.input(self, 2);
    const std::span<double> g = t.grad(self);
    const Tensor& gv = t.value(ig);
    std::vector<double> sum_g(c, 0.0), sum_gh(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        sum_g[j] += g[i * c + j];
        sum_gh[j] += g[i * c + j] * xhat[i * c + j];
      }
    if (t.needs_grad(ig)) {
      std::span<double> gg = t.grad(ig);
      for (std::size_t j = 0; j < c; ++j) gg[j] += sum_gh[j];
    }
    if (t.needs_grad(ib)) {
      std::span<double> gb = t.grad(ib);
      for (std::size_t j = 0; j < c; ++j) gb[j] += sum_g[j];
    }
    if (t.needs_grad(ix)) {
      std::span<double> gx = t.grad(ix);
      const double nn = static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double gij = g[i * c + j];
          if (training) {
            gx[i * c + j] += gv[j] * inv_std[j] * (gij - sum_g[j] / nn - xhat[i * c + j] * sum_gh[j] / nn);
          } else {
            gx[i * c + j] += gv[j] * inv_std[j] * gij;
          }
        }
    }
  });
}

}  // namespace pllvi
