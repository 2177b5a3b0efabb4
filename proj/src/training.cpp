#include "pllvi/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pllvi/config.hpp"

namespace pllvi {

using nlohmann::json;

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(T >= 1, "T must be >= 1");
  need(n_m >= 1, "n_m must be >= 1");
  need(b >= 1, "b must be >= 1");
  need(b_prime >= 1, "b_prime must be >= 1");
  need(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
  need(delta >= 0.0 && delta <= 1.0, "delta must lie in [0, 1]");
  need(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  need(m >= 1, "m must be >= 1");
  need(hidden >= 1, "hidden must be >= 1");
  need(ablation_concentration > 0.0, "ablation_concentration must be positive");
}

std::string metrics_csv_header() { return "epoch,generative_term,candidate_term,kl_term,total,wall_ms\n"; }

std::string metrics_csv_row(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.3f\n", m.epoch, m.generative_term, m.candidate_term,
                m.kl_term, m.total, m.wall_ms);
  return buf;
}

Tensor FitResult::predict(const PLLDataset& ds, std::span<const std::size_t> ids) {
  return classifier.predict(standardizer.transform(ds, ids));
}

std::vector<int> FitResult::predict_labels(const PLLDataset& ds, std::span<const std::size_t> ids) {
  const Tensor g = predict(ds, ids);
  std::vector<int> out(g.rows());
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto row = g.row_span(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double cvae_step(CvaeNets& nets, Adam& adam, const Tensor& x, const Tensor& y, double sigma, Rng& rng) {
  Tape tape;
  Var xv = tape.constant(x);
  CvaeOutput out = nets.forward(tape, xv, tape.constant(y), rng, Pass{});
  Var loss = mean(kl_gaussian_std(out.mu, out.log_var) - recon_loglik(xv, out.recon, sigma));
  const Tensor& recon = out.recon.value();
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - recon[i]) * (x[i] - recon[i]);
  if (!std::isfinite(loss.value().item())) throw NumericError("CVAE loss is not finite");
  adam.zero_grad();
  tape.backward(loss);
  adam.step();
  return std::sqrt(sq / static_cast<double>(x.size()));
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> ids, std::size_t n_m, Rng& rng) {
  const std::vector<std::size_t> order = shuffled_indices(ids.size(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += n_m) {
    std::vector<std::size_t> batch;
    for (std::size_t r = start; r < std::min(order.size(), start + n_m); ++r) batch.push_back(ids[order[r]]);
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<std::size_t> resolve_ids(const PLLDataset& ds, std::span<const std::size_t> ids) {
  if (ids.empty()) return all_indices(ds.n);
  return {ids.begin(), ids.end()};
}

[[noreturn]] void rethrow_numeric(const char* phase, std::size_t epoch, std::size_t batch, const std::exception& e) {
  throw NumericError(std::string(phase) + " epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": " +
                     e.what());
}

struct Setup {
  FitResult result;
  std::vector<std::size_t> ids;
  Tensor features;
  Rng rng;
};

Setup setup(const PLLDataset& ds, std::span<const std::size_t> ids, const TrainConfig& config) {
  config.validate();
  ds.validate();
  Setup s{{}, resolve_ids(ds, ids), {}, Rng(config.seed)};
  s.result.config = config;
  s.result.standardizer = Standardizer::fit(ds, s.ids);
  s.features = s.result.standardizer.transform(ds, all_indices(ds.n));
  s.result.labels = LabelTable(ds);
  s.result.classifier = ClassifierNet(ds.d, ds.k, config.hidden, s.rng);
  return s;
}

void finish_epoch(FitResult& result, EpochMetrics m, double weight, Clock::time_point t0, const FitHooks& hooks) {
  m.generative_term /= weight;
  m.candidate_term /= weight;
  m.kl_term /= weight;
  m.total /= weight;
  m.wall_ms = ms_since(t0);
  result.metrics.push_back(m);
  if (hooks.on_epoch) hooks.on_epoch(m);
  const std::size_t every = result.config.checkpoint_every;
  if (every > 0 && m.epoch % every == 0) {
    if (hooks.on_checkpoint) hooks.on_checkpoint(result, m.epoch);
    if (!result.config.checkpoint_dir.empty())
      save_checkpoint(result, m.epoch, result.config.checkpoint_dir / ("checkpoint_" + std::to_string(m.epoch) + ".json"));
  }
}

}  // namespace

std::vector<double> warmup(CvaeNets& nets, Adam& adam, const PLLDataset& ds, const Tensor& features,
                           const LabelTable& labels, std::span<const std::size_t> ids, const TrainConfig& config,
                           Rng& rng) {
  std::vector<double> mse;
  for (std::size_t epoch = 1; epoch <= config.T_w; ++epoch) {
    double sq = 0.0;
    std::size_t rows = 0, bi = 0;
    for (const auto& ids_b : epoch_batches(ids, config.n_m, rng)) {
      const Batch batch = make_batch(ds, features, ids_b);
      try {
        const double rmse = cvae_step(nets, adam, batch.x, labels.gather(batch.ids), 1.0, rng);
        sigma_ema_update(nets, rmse);
        sq += rmse * rmse * static_cast<double>(ids_b.size());
      } catch (const NumericError& e) {
        rethrow_numeric("warm-up", epoch, bi, e);
      }
      rows += ids_b.size();
      ++bi;
    }
    mse.push_back(sq / static_cast<double>(rows));
  }
  return mse;
}

FitResult fit(const PLLDataset& ds, std::span<const std::size_t> ids, const TrainConfig& config,
              const FitHooks& hooks) {
  Setup s = setup(ds, ids, config);
  FitResult& r = s.result;
  r.prior = compute_prior(bounds_from_dataset(ds, s.ids), config.delta);
  const Tensor prior_alpha(Shape{1, ds.k}, r.prior.alpha_pi);
  r.cvae = CvaeNets(ds.d, ds.k, config.m, config.hidden, s.rng);

  Adam adam_phi(r.classifier.parameters(), AdamConfig{.lr = config.lr});
  Adam adam_cvae(r.cvae.parameters(), AdamConfig{.lr = config.lr});
  r.warmup_mse = warmup(r.cvae, adam_cvae, ds, s.features, r.labels, s.ids, config, s.rng);

  ElboOptions opts;
  opts.b = config.b;
  opts.b_prime = config.b_prime;
  opts.beta = config.beta;
  opts.sampler = config.sampler;
  for (std::size_t epoch = 1; epoch <= config.T; ++epoch) {
    const auto t0 = Clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    double weight = 0.0;
    std::size_t bi = 0;
    for (const auto& ids_b : epoch_batches(s.ids, config.n_m, s.rng)) {
      const Batch batch = make_batch(ds, s.features, ids_b);
      try {
        Tape tape;
        ElboResult e = beta_elbo_batch(tape, r.classifier, r.cvae, prior_alpha, batch, opts, s.rng);
        if (!std::isfinite(e.terms.total)) throw NumericError("ELBO is not finite");
        adam_phi.zero_grad();
        tape.backward(e.loss);
        adam_phi.step();
        const double rmse = cvae_step(r.cvae, adam_cvae, batch.x, r.labels.gather(batch.ids), r.cvae.sigma, s.rng);
        sigma_ema_update(r.cvae, rmse);
        r.labels.update(batch.ids, e.alpha);
        const double w = static_cast<double>(ids_b.size());
        m.generative_term += w * e.terms.generative_term;
        m.candidate_term += w * e.terms.candidate_term;
        m.kl_term += w * e.terms.kl_term;
        m.total += w * e.terms.total;
        weight += w;
      } catch (const NumericError& e) {
        rethrow_numeric("main", epoch, bi, e);
      }
      ++bi;
    }
    finish_epoch(r, m, weight, t0, hooks);
  }
  return std::move(s.result);
}

FitResult fit_ablation(const PLLDataset& ds, std::span<const std::size_t> ids, const TrainConfig& config,
                       const FitHooks& hooks) {
  Setup s = setup(ds, ids, config);
  FitResult& r = s.result;
  Adam adam_phi(r.classifier.parameters(), AdamConfig{.lr = config.lr});
  for (std::size_t epoch = 1; epoch <= config.T; ++epoch) {
    const auto t0 = Clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    double weight = 0.0;
    std::size_t bi = 0;
    for (const auto& ids_b : epoch_batches(s.ids, config.n_m, s.rng)) {
      const Batch batch = make_batch(ds, s.features, ids_b);
      try {
        Tape tape;
        AblationResult a = ablation_loss(tape, r.classifier, r.labels, batch, config.b, config.ablation_concentration,
                                         s.rng, config.sampler);
        if (!std::isfinite(a.total)) throw NumericError("ablation loss is not finite");
        adam_phi.zero_grad();
        tape.backward(a.loss);
        adam_phi.step();
        r.labels.update(batch.ids, a.alpha);
        const double w = static_cast<double>(ids_b.size());
        m.candidate_term += w * a.candidate_term;
        m.kl_term += w * a.kl_term;
        m.total += w * -a.total;
        weight += w;
      } catch (const NumericError& e) {
        rethrow_numeric("ablation", epoch, bi, e);
      }
      ++bi;
    }
    finish_epoch(r, m, weight, t0, hooks);
  }
  return std::move(s.result);
}

// ---- checkpoints ---------------------------------------------------------------------------

namespace {

json tensor_json(const Tensor& t) { return json{{"shape", t.shape()}, {"values", t.values()}}; }

void tensor_from_json(const json& j, Tensor& t, const std::string& name) {
  const Shape shape = j.at("shape").get<Shape>();
  if (shape != t.shape()) throw std::runtime_error("checkpoint: shape mismatch for " + name);
  const std::vector<double> v = j.at("values").get<std::vector<double>>();
  std::copy(v.begin(), v.end(), t.values().begin());
}

json mlp_json(const Mlp& mlp) {
  json layers = json::array();
  for (const DenseLayer& l : mlp.layers()) {
    json lj{{"weight", tensor_json(l.weight)}, {"bias", tensor_json(l.bias)}};
    if (l.norm)
      lj["batch_norm"] = json{{"gamma", tensor_json(l.norm->gamma)},
                              {"beta", tensor_json(l.norm->beta)},
                              {"running_mean", l.norm->stats.running_mean},
                              {"running_var", l.norm->stats.running_var}};
    layers.push_back(std::move(lj));
  }
  return json{{"widths", mlp.widths()}, {"batch_norm", mlp.batch_norm()}, {"layers", layers}};
}

void mlp_from_json(const json& j, Mlp& mlp, const std::string& name) {
  if (j.at("widths").get<std::vector<std::size_t>>() != mlp.widths())
    throw std::runtime_error("checkpoint: widths mismatch for " + name);
  const json& layers = j.at("layers");
  for (std::size_t l = 0; l < mlp.layers().size(); ++l) {
    DenseLayer& layer = mlp.layers()[l];
    tensor_from_json(layers.at(l).at("weight"), layer.weight, name);
    tensor_from_json(layers.at(l).at("bias"), layer.bias, name);
    if (layer.norm) {
      const json& bn = layers.at(l).at("batch_norm");
      tensor_from_json(bn.at("gamma"), layer.norm->gamma, name);
      tensor_from_json(bn.at("beta"), layer.norm->beta, name);
      layer.norm->stats.running_mean = bn.at("running_mean").get<std::vector<double>>();
      layer.norm->stats.running_var = bn.at("running_var").get<std::vector<double>>();
    }
  }
}

}  // namespace

void save_checkpoint(const FitResult& r, std::size_t epoch, const std::filesystem::path& path) {
  json j;
  j["format"] = "pllvi-checkpoint";
  j["version"] = 1;
  j["epoch"] = epoch;
  j["config"] = to_json(r.config);
  j["seed"] = r.config.seed;
  j["dims"] = json{{"d", r.classifier.d()}, {"k", r.classifier.k()}};
  j["standardizer"] = json{{"mean", r.standardizer.mean}, {"scale", r.standardizer.scale}};
  j["prior"] = json{{"pi", r.prior.pi}, {"alpha_pi", r.prior.alpha_pi}, {"delta", r.prior.delta}};
  j["classifier"] = mlp_json(r.classifier.mlp());
  if (r.cvae.latent() > 0) {
    j["cvae"] = json{{"encoder", mlp_json(r.cvae.encoder())},
                     {"decoder", mlp_json(r.cvae.decoder())},
                     {"sigma", r.cvae.sigma},
                     {"sigma_ema_decay", r.cvae.sigma_ema_decay},
                     {"sigma_floor", r.cvae.sigma_floor}};
  }
  j["labels"] = json{{"n", r.labels.n()}, {"k", r.labels.k()}, {"values", r.labels.values()}};
  write_json_file(j, path);
}

FitResult load_checkpoint(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (j.value("format", "") != "pllvi-checkpoint" || j.value("version", 0) != 1)
    throw std::runtime_error(path.string() + ": not a version 1 checkpoint");
  FitResult r;
  r.config = train_config_from_json(j.at("config"));
  const std::size_t d = j.at("dims").at("d"), k = j.at("dims").at("k");
  Rng scratch(0);
  r.classifier = ClassifierNet(d, k, r.config.hidden, scratch);
  mlp_from_json(j.at("classifier"), r.classifier.mlp(), "classifier");
  if (j.contains("cvae")) {
    const json& c = j.at("cvae");
    r.cvae = CvaeNets(d, k, r.config.m, r.config.hidden, scratch);
    mlp_from_json(c.at("encoder"), r.cvae.encoder(), "encoder");
    mlp_from_json(c.at("decoder"), r.cvae.decoder(), "decoder");
    r.cvae.sigma = c.at("sigma");
    r.cvae.sigma_ema_decay = c.at("sigma_ema_decay");
    r.cvae.sigma_floor = c.at("sigma_floor");
  }
  r.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
  r.standardizer.scale = j.at("standardizer").at("scale").get<std::vector<double>>();
  r.prior.pi = j.at("prior").at("pi").get<std::vector<double>>();
  r.prior.alpha_pi = j.at("prior").at("alpha_pi").get<std::vector<double>>();
  r.prior.delta = j.at("prior").at("delta");
  return r;
}

}  // namespace pllvi
