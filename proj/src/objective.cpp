#include "pllvi/objective.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pllvi/special.hpp"

namespace pllvi {

namespace {

double log_norm_constant(std::size_t k) { return -static_cast<double>(k - 1) * std::numbers::ln2; }

Tensor repeat_tensor_rows(const Tensor& t, std::size_t times) {
  Tensor out(Shape{t.rows() * times, t.cols()});
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t s = 0; s < times; ++s) {
      const auto src = t.row_span(r);
      std::copy(src.begin(), src.end(), out.row_span(r * times + s).begin());
    }
  return out;
}

}  // namespace

double candidate_mass(std::span<const std::uint8_t> s, std::span<const double> y) {
  if (s.size() != y.size()) throw ShapeError("candidate_mass", Shape{s.size()}, Shape{y.size()});
  double inner = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j]) inner += y[j];
  return std::ldexp(inner, -static_cast<int>(s.size() - 1));
}

LogCandidateMass log_candidate_mass(std::span<const std::uint8_t> s, std::span<const double> y) {
  if (s.size() != y.size()) throw ShapeError("log_candidate_mass", Shape{s.size()}, Shape{y.size()});
  double inner = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j]) inner += y[j];
  LogCandidateMass out;
  if (inner < kCandidateFloor) {
    inner = kCandidateFloor;
    out.degenerate = true;
  }
  out.value = std::log(inner) + log_norm_constant(s.size());
  return out;
}

Var log_candidate_mass(Var y, const Tensor& mask) {
  if (y.shape() != mask.shape()) throw ShapeError("log_candidate_mass", y.shape(), mask.shape());
  Var inner = sum_rows(y * y.tape->constant(mask));
  return log(clamp(inner, kCandidateFloor, std::numeric_limits<double>::infinity())) +
         log_norm_constant(mask.cols());
}

double expected_log_candidate_mass(std::span<const std::uint8_t> s, std::span<const double> alpha) {
  if (s.size() != alpha.size()) throw ShapeError("expected_log_candidate_mass", Shape{s.size()}, Shape{alpha.size()});
  double a_s = 0.0, a_0 = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    a_0 += alpha[j];
    if (s[j]) a_s += alpha[j];
  }
  if (a_s <= 0.0) throw DomainError("expected_log_candidate_mass", "empty candidate set");
  return special::digamma(a_s) - special::digamma(a_0) + log_norm_constant(s.size());
}

Batch make_batch(const PLLDataset& ds, const Tensor& features, std::span<const std::size_t> ids) {
  if (ids.empty()) throw std::invalid_argument("empty batch");
  if (features.rows() != ds.n || features.cols() != ds.d) throw ShapeError("make_batch", features.shape(), Shape{ds.n, ds.d});
  Batch b;
  b.ids.assign(ids.begin(), ids.end());
  b.x = Tensor(Shape{ids.size(), ds.d});
  b.mask = Tensor(Shape{ids.size(), ds.k});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto src = features.row_span(ids[r]);
    std::copy(src.begin(), src.end(), b.x.row_span(r).begin());
    const auto s = ds.s(ids[r]);
    for (std::size_t j = 0; j < ds.k; ++j) b.mask.at(r, j) = s[j] ? 1.0 : 0.0;
  }
  return b;
}

Var log_px_given_y(Tape& tape, CvaeNets& nets, Var x, Var y, std::size_t b_prime, Rng& rng, const Pass& pass) {
  if (b_prime == 0) throw std::invalid_argument("b' must be >= 1");
  const std::size_t n = x.value().rows();
  Var xr = b_prime == 1 ? x : repeat_rows(x, b_prime);
  Var yr = b_prime == 1 ? y : repeat_rows(y, b_prime);
  CvaeOutput out = nets.forward(tape, xr, yr, rng, pass);
  // log r(z | x, y) = -1/2 sum eps^2 - 1/2 sum log_var - m/2 log 2pi; the 2pi terms cancel against log N(z; 0, I).
  Tensor eps_sq(Shape{n * b_prime, 1});
  for (std::size_t r = 0; r < n * b_prime; ++r) {
    double s = 0.0;
    for (double e : out.eps.row_span(r)) s += e * e;
    eps_sq[r] = 0.5 * s;
  }
  Var log_w = recon_loglik(xr, out.recon, nets.sigma) - sum_rows(square(out.z)) * 0.5 +
              sum_rows(out.log_var) * 0.5 + tape.constant(std::move(eps_sq));
  if (b_prime == 1) return log_w;
  return logsumexp_rows(reshape(log_w, Shape{n, b_prime})) - std::log(static_cast<double>(b_prime));
}

ElboResult beta_elbo_batch(Tape& tape, ClassifierNet& classifier, CvaeNets& nets, const Tensor& prior_alpha,
                           const Batch& batch, const ElboOptions& options, Rng& rng) {
  if (batch.ids.empty() || batch.x.rows() == 0) throw std::invalid_argument("empty batch");
  if (options.b == 0 || options.b_prime == 0) throw std::invalid_argument("b and b' must be >= 1");
  Var x = tape.constant(batch.x);
  Var alpha = classifier.alpha(tape, x, tape.constant(batch.mask), options.classifier_pass);
  Var y = sample_dirichlet(alpha, options.b, rng, options.sampler);
  Var candidate = mean(log_candidate_mass(y, repeat_tensor_rows(batch.mask, options.b)));
  Var xr = options.b == 1 ? x : repeat_rows(x, options.b);
  Var generative = mean(log_px_given_y(tape, nets, xr, y, options.b_prime, rng, options.cvae_pass));
  Var kl = mean(kl_dirichlet(alpha, tape.constant(prior_alpha.reshaped(Shape{1, prior_alpha.size()}))));

  ElboResult out;
  out.terms.generative_term = generative.value().item();
  out.terms.candidate_term = candidate.value().item();
  out.terms.kl_term = kl.value().item();
  out.terms.beta = options.beta;
  out.terms.total = out.terms.generative_term + out.terms.candidate_term - options.beta * out.terms.kl_term;
  out.loss = kl * options.beta - generative - candidate;
  out.alpha = alpha.value();
  return out;
}

// ---- label table ---------------------------------------------------------------------

LabelTable::LabelTable(const PLLDataset& ds) : n_(ds.n), k_(ds.k), rows_(ds.n * ds.k, 0.0), support_(ds.candidates) {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t c = ds.candidate_count(i);
    if (c == 0) throw std::invalid_argument("row " + std::to_string(i) + ": empty candidate set");
    for (std::size_t j = 0; j < k_; ++j)
      if (support_[i * k_ + j]) rows_[i * k_ + j] = 1.0 / static_cast<double>(c);
  }
}

Tensor LabelTable::gather(std::span<const std::size_t> ids) const {
  Tensor out(Shape{ids.size(), k_});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= n_) throw std::out_of_range("instance " + std::to_string(ids[r]) + " is not in the label table");
    const auto src = row(ids[r]);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

void LabelTable::update(std::span<const std::size_t> ids, const Tensor& alpha) {
  if (alpha.rows() != ids.size() || alpha.cols() != k_) throw ShapeError("update_labels", alpha.shape(), Shape{ids.size(), k_});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const std::size_t i = ids[r];
    if (i >= n_) throw std::out_of_range("instance " + std::to_string(i) + " is not in the label table");
    double total = 0.0;
    for (std::size_t j = 0; j < k_; ++j)
      if (support_[i * k_ + j]) total += alpha.at(r, j);
    for (std::size_t j = 0; j < k_; ++j) rows_[i * k_ + j] = support_[i * k_ + j] ? alpha.at(r, j) / total : 0.0;
  }
}

double LabelTable::max_sum_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (double v : row(i)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double LabelTable::off_support_mass() const {
  double off = 0.0;
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (!support_[i]) off += std::abs(rows_[i]);
  return off;
}

AblationResult ablation_loss(Tape& tape, ClassifierNet& classifier, const LabelTable& labels, const Batch& batch,
                             std::size_t b, double concentration, Rng& rng, DirichletSampler sampler, const Pass& pass) {
  if (batch.ids.empty()) throw std::invalid_argument("empty batch");
  if (b == 0) throw std::invalid_argument("b must be >= 1");
  Tensor target = labels.gather(batch.ids);
  for (double& v : target.values()) v = 1.0 + concentration * v;
  Var alpha = classifier.alpha(tape, tape.constant(batch.x), tape.constant(batch.mask), pass);
  Var y = sample_dirichlet(alpha, b, rng, sampler);
  Var candidate = mean(log_candidate_mass(y, repeat_tensor_rows(batch.mask, b)));
  Var kl = mean(kl_dirichlet(alpha, tape.constant(std::move(target))));
  AblationResult out;
  out.kl_term = kl.value().item();
  out.candidate_term = candidate.value().item();
  out.total = out.kl_term - out.candidate_term;
  out.loss = kl - candidate;
  out.alpha = alpha.value();
  return out;
}

}  // namespace pllvi
