#include "pllvi/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pllvi/distributions.hpp"

namespace pllvi {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> ids = all_indices(n);
  for (std::size_t i = n; i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  return ids;
}

// ---- PLLDataset ---------------------------------------------------------------------

std::size_t PLLDataset::candidate_count(std::size_t i) const {
  std::size_t c = 0;
  for (std::uint8_t b : s(i)) c += b;
  return c;
}

double PLLDataset::mean_candidate_size() const {
  if (n == 0) return 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) total += candidate_count(i);
  return static_cast<double>(total) / static_cast<double>(n);
}

void PLLDataset::validate() const {
  if (features.size() != n * d || candidates.size() != n * k)
    throw std::invalid_argument("dataset buffers do not match n=" + std::to_string(n) + " d=" + std::to_string(d) +
                                " k=" + std::to_string(k));
  if (true_labels && true_labels->size() != n) throw std::invalid_argument("true label count differs from n");
  for (std::size_t i = 0; i < n; ++i) {
    if (candidate_count(i) == 0) throw std::invalid_argument("row " + std::to_string(i) + ": empty candidate set");
    for (std::uint8_t b : s(i))
      if (b > 1) throw std::invalid_argument("row " + std::to_string(i) + ": candidate mask must be 0/1");
    if (true_labels) {
      const int y = (*true_labels)[i];
      if (y < 0 || static_cast<std::size_t>(y) >= k)
        throw std::invalid_argument("row " + std::to_string(i) + ": true label out of range");
      if (!s(i)[static_cast<std::size_t>(y)])
        throw std::invalid_argument("row " + std::to_string(i) + ": true label not in candidate set");
    }
  }
}

PLLDataset PLLDataset::subset(std::span<const std::size_t> ids) const {
  PLLDataset out;
  out.n = ids.size();
  out.d = d;
  out.k = k;
  out.comments = comments;
  out.features.reserve(ids.size() * d);
  out.candidates.reserve(ids.size() * k);
  if (true_labels) out.true_labels.emplace();
  for (std::size_t i : ids) {
    if (i >= n) throw std::out_of_range("subset index " + std::to_string(i) + " >= n");
    out.features.insert(out.features.end(), x(i).begin(), x(i).end());
    out.candidates.insert(out.candidates.end(), s(i).begin(), s(i).end());
    if (true_labels) out.true_labels->push_back((*true_labels)[i]);
  }
  return out;
}

// ---- .pll text format -------------------------------------------------------------

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

PLLDataset parse_dataset(const std::string& text) {
  PLLDataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t row = 0;
  std::size_t labelled = 0;
  std::vector<int> labels;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') {
      if (!have_header) ds.comments.push_back(line.substr(1));
      continue;
    }
    if (blank(line)) continue;
    const auto toks = split_ws(line);
    if (!have_header) {
      if (toks.size() != 3 || !parse_number(toks[0], ds.n) || !parse_number(toks[1], ds.d) ||
          !parse_number(toks[2], ds.k))
        throw ParseError(lineno, "malformed header, expected \"n d k\"");
      if (ds.k == 0) throw ParseError(lineno, "malformed header, k must be positive");
      have_header = true;
      ds.features.reserve(ds.n * ds.d);
      ds.candidates.reserve(ds.n * ds.k);
      labels.reserve(ds.n);
      continue;
    }
    if (row == ds.n) throw ParseError(lineno, "unexpected data after " + std::to_string(ds.n) + " rows");
    if (toks.size() != ds.d + 2)
      throw ParseError(lineno, "expected " + std::to_string(ds.d + 2) + " fields, got " + std::to_string(toks.size()));
    for (std::size_t j = 0; j < ds.d; ++j) {
      double v;
      if (!parse_number(toks[j], v) || !std::isfinite(v))
        throw ParseError(lineno, "bad feature value '" + std::string(toks[j]) + "'");
      ds.features.push_back(v);
    }
    const std::string_view mask = toks[ds.d];
    if (mask.size() != ds.k)
      throw ParseError(lineno, "bitmask length " + std::to_string(mask.size()) + " != k=" + std::to_string(ds.k));
    std::size_t count = 0;
    for (char c : mask) {
      if (c != '0' && c != '1') throw ParseError(lineno, "bitmask must contain only 0 and 1");
      ds.candidates.push_back(c == '1');
      count += c == '1';
    }
    if (count == 0) throw ParseError(lineno, "empty candidate set");
    int y;
    if (!parse_number(toks[ds.d + 1], y) || y < -1 || y >= static_cast<int>(ds.k))
      throw ParseError(lineno, "bad true label '" + std::string(toks[ds.d + 1]) + "'");
    if (y >= 0) {
      if (mask[static_cast<std::size_t>(y)] != '1') throw ParseError(lineno, "true label not in candidate set");
      ++labelled;
    }
    labels.push_back(y);
    ++row;
  }
  if (!have_header) throw ParseError(lineno, "missing header");
  if (row != ds.n)
    throw ParseError(lineno, "expected " + std::to_string(ds.n) + " rows, found " + std::to_string(row));
  if (labelled == ds.n) {
    ds.true_labels = std::move(labels);
  } else if (labelled != 0) {
    throw ParseError(lineno, "true labels must be given for all rows or none");
  }
  return ds;
}

PLLDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string format_dataset(const PLLDataset& ds) {
  ds.validate();
  std::string out;
  for (const std::string& c : ds.comments) out += "#" + c + "\n";
  out += std::to_string(ds.n) + " " + std::to_string(ds.d) + " " + std::to_string(ds.k) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (double v : ds.x(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.append(buf, ptr);
      out += ' ';
    }
    for (std::uint8_t b : ds.s(i)) out += b ? '1' : '0';
    out += ' ';
    out += std::to_string(ds.true_labels ? (*ds.true_labels)[i] : -1);
    out += '\n';
  }
  return out;
}

void save_dataset(const PLLDataset& ds, const std::filesystem::path& path) {
  const std::string text = format_dataset(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  out << text;
}

// ---- Standardizer -------------------------------------------------------------------

Standardizer Standardizer::fit(const PLLDataset& ds, std::span<const std::size_t> ids) {
  Standardizer st;
  st.mean.assign(ds.d, 0.0);
  st.scale.assign(ds.d, 1.0);
  if (ids.empty()) return st;
  const double n = static_cast<double>(ids.size());
  for (std::size_t i : ids)
    for (std::size_t j = 0; j < ds.d; ++j) st.mean[j] += ds.x(i)[j];
  for (double& m : st.mean) m /= n;
  std::vector<double> var(ds.d, 0.0);
  for (std::size_t i : ids)
    for (std::size_t j = 0; j < ds.d; ++j) {
      const double c = ds.x(i)[j] - st.mean[j];
      var[j] += c * c;
    }
  for (std::size_t j = 0; j < ds.d; ++j) {
    const double sd = std::sqrt(var[j] / n);
    st.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return st;
}

Standardizer Standardizer::identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

std::vector<double> Standardizer::transform_row(std::span<const double> x) const {
  if (x.size() != mean.size()) throw ShapeError("Standardizer", Shape{x.size()}, Shape{mean.size()});
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
  return out;
}

Tensor Standardizer::transform(const PLLDataset& ds, std::span<const std::size_t> ids) const {
  Tensor out(Shape{ids.size(), ds.d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto x = ds.x(ids[r]);
    for (std::size_t j = 0; j < ds.d; ++j) out.at(r, j) = (x[j] - mean[j]) / scale[j];
  }
  return out;
}

// ---- synthetic blobs ----------------------------------------------------------------

PLLDataset synth_blobs(std::size_t n, std::size_t k, std::size_t d, double separation, Rng& rng) {
  if (k < 2 || d < 2) throw std::invalid_argument("synth_blobs needs k >= 2 and d >= 2");
  // Orthonormal pair spanning the plane of the circle.
  std::vector<double> u(d), v(d);
  for (;;) {
    for (double& a : u) a = rng.normal();
    for (double& a : v) a = rng.normal();
    double uu = 0.0;
    for (double a : u) uu += a * a;
    if (uu < 1e-12) continue;
    for (double& a : u) a /= std::sqrt(uu);
    double uv = 0.0;
    for (std::size_t j = 0; j < d; ++j) uv += u[j] * v[j];
    for (std::size_t j = 0; j < d; ++j) v[j] -= uv * u[j];
    double vv = 0.0;
    for (double a : v) vv += a * a;
    if (vv < 1e-12) continue;
    for (double& a : v) a /= std::sqrt(vv);
    break;
  }
  const double phase = 2.0 * std::numbers::pi * rng.uniform();
  std::vector<double> means(k * d);
  for (std::size_t c = 0; c < k; ++c) {
    const double t = phase + 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
    for (std::size_t j = 0; j < d; ++j) means[c * d + j] = separation * (std::cos(t) * u[j] + std::sin(t) * v[j]);
  }

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
  for (std::size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);

  PLLDataset ds;
  ds.n = n;
  ds.d = d;
  ds.k = k;
  ds.features.resize(n * d);
  ds.candidates.assign(n * k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    for (std::size_t j = 0; j < d; ++j) ds.features[i * d + j] = means[c * d + j] + rng.normal();
    ds.candidates[i * k + c] = 1;
  }
  ds.true_labels = std::move(labels);
  return ds;
}

// ---- supervised MLP -------------------------------------------------------------------

SupervisedModel::SupervisedModel(std::size_t d, std::size_t k, const SupervisedConfig& config, Rng& rng)
    : config_(config), net_({d, config.hidden, config.hidden, k}, true, rng), standardizer_(Standardizer::identity(d)),
      k_(k) {}

void SupervisedModel::train(const PLLDataset& ds, std::span<const std::size_t> ids, Rng& rng) {
  if (!ds.true_labels) throw std::invalid_argument("supervised training needs true labels");
  if (ids.empty()) throw std::invalid_argument("supervised training on an empty set");
  standardizer_ = Standardizer::fit(ds, ids);
  Adam adam(net_.parameters("probe"), AdamConfig{.lr = config_.lr});
  const std::size_t bs = std::max<std::size_t>(1, config_.batch_size);
  Tape tape;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(ids.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      // Batch norm needs at least two rows for a batch variance.
      if (stop - start < 2) continue;
      std::vector<std::size_t> batch;
      for (std::size_t r = start; r < stop; ++r) batch.push_back(ids[order[r]]);
      Tensor onehot(Shape{batch.size(), k_});
      for (std::size_t r = 0; r < batch.size(); ++r)
        onehot.at(r, static_cast<std::size_t>((*ds.true_labels)[batch[r]])) = 1.0;
      Var logits = net_.forward(tape, tape.constant(standardizer_.transform(ds, batch)), Pass{});
      Var loss = mean(logsumexp_rows(logits) - sum_rows(logits * tape.constant(onehot)));
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
    }
  }
}

Tensor SupervisedModel::predict_proba(const PLLDataset& ds, std::span<const std::size_t> ids) {
  Tape tape;
  Var logits = net_.forward(tape, tape.constant(standardizer_.transform(ds, ids)), Pass{false, false});
  Tensor probs = logits.value();
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row_span(r);
    const double lse = log_sum_exp(row);
    for (double& v : row) v = std::exp(v - lse);
  }
  return probs;
}

std::vector<int> SupervisedModel::predict(const PLLDataset& ds, std::span<const std::size_t> ids) {
  const Tensor probs = predict_proba(ds, ids);
  std::vector<int> out(ids.size());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto row = probs.row_span(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

// ---- candidate generation -------------------------------------------------------------

void GenSpec::validate(std::size_t k) const {
  if (!(tail_base > 0.0 && tail_base < 1.0)) throw std::invalid_argument("tail_base must lie in (0, 1)");
  if (mix_instance < 0.0 || mix_longtail < 0.0 || std::abs(mix_instance + mix_longtail - 1.0) > 1e-9)
    throw std::invalid_argument("mix weights must be non-negative and sum to 1");
  if (permutation) {
    if (permutation->size() != k) throw std::invalid_argument("permutation must have k entries");
    std::vector<bool> seen(k, false);
    for (std::size_t r : *permutation) {
      if (r >= k || seen[r]) throw std::invalid_argument("permutation is not a permutation of 0..k-1");
      seen[r] = true;
    }
  }
}

double longtail_rate(std::size_t rank, std::size_t k, double tail_base) {
  return std::pow(tail_base, static_cast<double>(rank + 1) / static_cast<double>(k));
}

double confusion_rate(std::span<const double> probs, std::size_t label) {
  double best_other = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j)
    if (j != label) best_other = std::max(best_other, probs[j]);
  if (best_other <= 0.0) return probs[label] > 0.0 ? 1.0 : 0.0;
  return probs[label] / best_other;
}

std::vector<double> inclusion_probabilities(std::span<const double> probs, int y, std::span<const std::size_t> rank,
                                            const GenSpec& spec) {
  const std::size_t k = probs.size();
  std::vector<double> xi(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (static_cast<int>(j) == y) {
      xi[j] = 1.0;
      continue;
    }
    const double x1 = confusion_rate(probs, j);
    double v = x1;
    if (spec.strategy == GenStrategy::longtail_mix)
      v = spec.mix_instance * x1 + spec.mix_longtail * longtail_rate(rank[j], k, spec.tail_base);
    xi[j] = std::clamp(v, 0.0, 1.0);
  }
  return xi;
}

PLLDataset draw_candidates(const PLLDataset& ds, const Tensor& probs, std::span<const std::size_t> rank,
                           const GenSpec& spec, Rng& rng) {
  if (!ds.true_labels) throw std::invalid_argument("candidate generation needs true labels");
  if (probs.rows() != ds.n || probs.cols() != ds.k) throw ShapeError("draw_candidates", probs.shape(), Shape{ds.n, ds.k});
  if (rank.size() != ds.k) throw std::invalid_argument("rank must have k entries");
  PLLDataset out = ds;
  for (std::size_t i = 0; i < ds.n; ++i) {
    const int y = (*ds.true_labels)[i];
    const std::vector<double> xi = inclusion_probabilities(probs.row_span(i), y, rank, spec);
    auto s = out.s(i);
    for (std::size_t j = 0; j < ds.k; ++j) {
      if (static_cast<int>(j) == y) {
        s[j] = 1;
        continue;
      }
      s[j] = rng.uniform() <= xi[j] ? 1 : 0;
    }
  }
  return out;
}

std::vector<std::size_t> random_permutation(std::size_t k, Rng& rng) { return shuffled_indices(k, rng); }

PLLDataset generate_candidates(const PLLDataset& ds, const GenSpec& spec, Rng& rng) {
  if (!ds.true_labels) throw std::invalid_argument("candidate generation needs true labels");
  spec.validate(ds.k);
  std::vector<std::size_t> rank = spec.permutation ? *spec.permutation : random_permutation(ds.k, rng);
  Rng probe_rng(spec.probe_seed);
  SupervisedModel probe(ds.d, ds.k, spec.probe, probe_rng);
  const std::vector<std::size_t> ids = all_indices(ds.n);
  probe.train(ds, ids, probe_rng);
  const Tensor probs = probe.predict_proba(ds, ids);
  return draw_candidates(ds, probs, rank, spec, rng);
}

// ---- co-occurrence ----------------------------------------------------------------------

std::vector<double> Cooccurrence::row_normalized() const {
  std::vector<double> out(k * k, 0.0);
  for (std::size_t y = 0; y < k; ++y) {
    const double total = static_cast<double>(at(y, y));
    if (total == 0.0) continue;
    for (std::size_t j = 0; j < k; ++j) out[y * k + j] = static_cast<double>(at(y, j)) / total;
  }
  return out;
}

std::string Cooccurrence::to_csv(bool normalized) const {
  std::ostringstream out;
  out << "true_label";
  for (std::size_t j = 0; j < k; ++j) out << ",c" << j;
  out << '\n';
  const std::vector<double> norm = normalized ? row_normalized() : std::vector<double>{};
  out.precision(17);
  for (std::size_t y = 0; y < k; ++y) {
    out << y;
    for (std::size_t j = 0; j < k; ++j) {
      if (normalized)
        out << ',' << norm[y * k + j];
      else
        out << ',' << at(y, j);
    }
    out << '\n';
  }
  return out.str();
}

Cooccurrence cooccurrence(const PLLDataset& ds) {
  if (!ds.true_labels) throw std::invalid_argument("co-occurrence needs true labels");
  Cooccurrence c{ds.k, std::vector<std::size_t>(ds.k * ds.k, 0)};
  for (std::size_t i = 0; i < ds.n; ++i) {
    const auto y = static_cast<std::size_t>((*ds.true_labels)[i]);
    c.counts[y * ds.k + y] += 1;
    const auto s = ds.s(i);
    for (std::size_t j = 0; j < ds.k; ++j)
      if (j != y && s[j]) c.counts[y * ds.k + j] += 1;
  }
  return c;
}

}  // namespace pllvi
