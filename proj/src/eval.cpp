#include "pllvi/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "pllvi/config.hpp"
#include "pllvi/kernels.hpp"
#include "pllvi/special.hpp"

namespace pllvi {

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size())
    throw std::invalid_argument("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(truth.size()) + " labels");
  if (truth.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predictions[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double sample_mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

WelchResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_ttest needs at least two values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = sample_mean(a), mb = sample_mean(b);
  const double va = std::pow(sample_std(a), 2) / na, vb = std::pow(sample_std(b), 2) / nb;
  const double se2 = va + vb;
  WelchResult r;
  if (se2 == 0.0) {
    r.dof = na + nb - 2.0;
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = special::student_t_two_sided_p(r.t, r.dof);
  return r;
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Tensor plknn(const PLLDataset& train, const Tensor& queries, std::size_t k_neighbors) {
  if (train.n == 0) throw std::invalid_argument("plknn: empty training set");
  if (k_neighbors == 0) throw std::invalid_argument("plknn: k_neighbors must be >= 1");
  if (queries.rank() != 2 || queries.cols() != train.d) throw ShapeError("plknn", queries.shape(), Shape{queries.rows(), train.d});
  const std::size_t nq = queries.rows(), kk = std::min(k_neighbors, train.n);
  std::vector<double> dist(nq * train.n);
  kernels::pairwise_sq_dist(queries.values(), train.features, dist, nq, train.n, train.d);
  Tensor out(Shape{nq, train.k});
  std::vector<std::size_t> order(train.n);
  for (std::size_t q = 0; q < nq; ++q) {
    const double* row = dist.data() + q * train.n;
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                      [row](std::size_t a, std::size_t b) { return row[a] < row[b] || (row[a] == row[b] && a < b); });
    auto votes = out.row_span(q);
    for (std::size_t r = 0; r < kk; ++r) {
      const std::size_t i = order[r];
      const double w = 1.0 / static_cast<double>(train.candidate_count(i));
      const auto s = train.s(i);
      for (std::size_t j = 0; j < train.k; ++j)
        if (s[j]) votes[j] += w;
    }
    double total = 0.0;
    for (double v : votes) total += v;
    for (double& v : votes) v /= total;
  }
  return out;
}

std::vector<double> plknn(const PLLDataset& train, std::span<const double> query, std::size_t k_neighbors) {
  const Tensor out = plknn(train, Tensor(Shape{1, query.size()}, std::vector<double>(query.begin(), query.end())), k_neighbors);
  return {out.values().begin(), out.values().end()};
}

Split stratified_split(const PLLDataset& ds, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must lie in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ds.n; ++i) {
    std::string key;
    if (ds.true_labels) {
      key = std::to_string((*ds.true_labels)[i]);
    } else {
      for (std::uint8_t b : ds.s(i)) key += b ? '1' : '0';
    }
    strata[key].push_back(i);
  }
  Split split;
  for (auto& [key, rows] : strata) {
    const std::vector<std::size_t> order = shuffled_indices(rows.size(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    for (std::size_t r = 0; r < rows.size(); ++r) (r < n_test ? split.test : split.train).push_back(rows[order[r]]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::vipll: return "vipll";
    case Method::vipll_ablation: return "vipll_ablation";
    case Method::plknn: return "plknn";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "vipll") return Method::vipll;
  if (s == "vipll_ablation") return Method::vipll_ablation;
  if (s == "plknn") return Method::plknn;
  throw std::invalid_argument("unknown method '" + s + "'");
}

double run_seed(const PLLDataset& ds, const ExperimentConfig& config, std::uint64_t seed,
                std::vector<EpochMetrics>* metrics) {
  if (!ds.true_labels) throw std::invalid_argument("evaluation needs true labels on the held-out rows");
  Rng split_rng(mix_seed(seed ^ 0x5eed5eedULL));
  const Split split = stratified_split(ds, config.test_fraction, split_rng);
  std::vector<int> truth;
  for (std::size_t i : split.test) truth.push_back((*ds.true_labels)[i]);

  std::vector<int> pred;
  if (config.method == Method::plknn) {
    const PLLDataset train = ds.subset(split.train);
    const PLLDataset test = ds.subset(split.test);
    const Tensor votes = plknn(train, Tensor(Shape{test.n, test.d}, test.features), config.k_neighbors);
    for (std::size_t r = 0; r < test.n; ++r) pred.push_back(argmax(votes.row_span(r)));
  } else {
    TrainConfig tc = config.train;
    tc.seed = seed;
    FitResult fr = config.method == Method::vipll ? fit(ds, split.train, tc) : fit_ablation(ds, split.train, tc);
    pred = fr.predict_labels(ds, split.test);
    if (metrics) *metrics = fr.metrics;
  }
  return accuracy(pred, truth);
}

RunReport run_experiment(const PLLDataset& ds, const ExperimentConfig& config) {
  if (config.n_seeds == 0) throw std::invalid_argument("n_seeds must be >= 1");
  RunReport report;
  report.method = config.method;
  report.accuracies.assign(config.n_seeds, 0.0);
  report.wall_ms.assign(config.n_seeds, 0.0);
  for (std::size_t i = 0; i < config.n_seeds; ++i) report.seeds.push_back(mix_seed(config.seed + i));

  std::vector<std::exception_ptr> errors(config.n_seeds);
  const auto n = static_cast<std::ptrdiff_t>(config.n_seeds);
#pragma omp parallel for schedule(dynamic, 1) if (config.parallel_seeds)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      report.accuracies[i] = run_seed(ds, config, report.seeds[i]);
      report.wall_ms[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  report.mean = sample_mean(report.accuracies);
  report.std = sample_std(report.accuracies);
  report.config = nlohmann::json{{"method", to_string(config.method)},
                                 {"n_seeds", config.n_seeds},
                                 {"seed", config.seed},
                                 {"test_fraction", config.test_fraction},
                                 {"k_neighbors", config.k_neighbors},
                                 {"train", to_json(config.train)}};
  return report;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json cmp = nlohmann::json::object();
  for (const auto& [name, w] : comparisons) cmp[name] = {{"t", w.t}, {"dof", w.dof}, {"p", w.p}};
  return nlohmann::json{{"method", to_string(method)},
                        {"seeds", seeds},
                        {"accuracies", accuracies},
                        {"mean", mean},
                        {"std", std},
                        {"wall_ms", wall_ms},
                        {"config", config},
                        {"significance_test", "Welch two-sided, unpaired, level 0.05"},
                        {"comparisons", cmp},
                        {"not_significantly_worse", not_significantly_worse}};
}

void mark_significance(std::vector<RunReport>& reports, double level) {
  if (reports.empty()) return;
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (reports[i].mean > reports[best].mean) best = i;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    reports[i].comparisons.clear();
    if (i == best) {
      reports[i].not_significantly_worse = true;
      continue;
    }
    bool flagged = true;
    if (reports[i].accuracies.size() >= 2 && reports[best].accuracies.size() >= 2) {
      const WelchResult w = welch_ttest(reports[i].accuracies, reports[best].accuracies);
      reports[i].comparisons[to_string(reports[best].method)] = w;
      flagged = w.p >= level;
    } else {
      flagged = reports[i].mean >= reports[best].mean;
    }
    reports[i].not_significantly_worse = flagged;
  }
}

}  // namespace pllvi
