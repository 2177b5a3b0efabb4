// pllvi: candidate generation, prior inspection, training and evaluation
// for variational partial-label learning.
//
//   pllvi generate --config c.json --seed 1 --out runs/gen
//   pllvi prior    --data train.pll
//   pllvi train    --data train.pll --config c.json --out runs/fit
//   pllvi eval     --data train.pll --config c.json --out runs/eval
//   pllvi eval     --data test.pll --model runs/fit/model.json
//   pllvi cooc     --data train.pll --out runs/cooc
//
// Exit codes: 0 success, 2 validation error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pllvi/config.hpp"
#include "pllvi/data.hpp"
#include "pllvi/eval.hpp"
#include "pllvi/prior.hpp"
#include "pllvi/runtime.hpp"
#include "pllvi/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pllvi;

namespace {

struct Blobs {
  std::size_t n = 2000, k = 5, d = 2;
  double separation = 4.0;
};

// Top-level config file: {"dataset", "blobs", "gen", "train", "experiment"}.
struct RunConfig {
  std::optional<fs::path> dataset;
  std::optional<Blobs> blobs;
  GenSpec gen;
  TrainConfig train;
  ExperimentConfig experiment;
  std::vector<Method> methods{Method::vipll, Method::vipll_ablation, Method::plknn};
};

RunConfig load_config(const std::optional<fs::path>& path) {
  RunConfig rc;
  if (!path) return rc;
  const json j = read_json_file(*path);
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "dataset") {
      rc.dataset = fs::path(value.get<std::string>());
    } else if (key == "blobs") {
      Blobs b;
      for (const auto& [bk, bv] : value.items()) {
        if (bk == "n") b.n = bv.get<std::size_t>();
        else if (bk == "k") b.k = bv.get<std::size_t>();
        else if (bk == "d") b.d = bv.get<std::size_t>();
        else if (bk == "separation") b.separation = bv.get<double>();
        else throw ConfigError("blobs: unknown key '" + bk + "'");
      }
      rc.blobs = b;
    } else if (key == "gen") {
      rc.gen = gen_spec_from_json(value);
    } else if (key == "train") {
      rc.train = train_config_from_json(value);
    } else if (key == "experiment") {
      for (const auto& [ek, ev] : value.items()) {
        if (ek == "n_seeds") rc.experiment.n_seeds = ev.get<std::size_t>();
        else if (ek == "test_fraction") rc.experiment.test_fraction = ev.get<double>();
        else if (ek == "k_neighbors") rc.experiment.k_neighbors = ev.get<std::size_t>();
        else if (ek == "parallel_seeds") rc.experiment.parallel_seeds = ev.get<bool>();
        else if (ek == "methods") {
          rc.methods.clear();
          for (const auto& m : ev) rc.methods.push_back(method_from_string(m.get<std::string>()));
        } else {
          throw ConfigError("experiment: unknown key '" + ek + "'");
        }
      }
      if (rc.experiment.n_seeds == 0) throw ConfigError("experiment.n_seeds must be >= 1");
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  return rc;
}

PLLDataset load_input(const std::optional<fs::path>& data, const RunConfig& rc, std::uint64_t seed) {
  if (data) return load_dataset(*data);
  if (rc.dataset) return load_dataset(*rc.dataset);
  if (rc.blobs) {
    Rng rng(seed);
    return synth_blobs(rc.blobs->n, rc.blobs->k, rc.blobs->d, rc.blobs->separation, rng);
  }
  throw ConfigError("no input: pass --data or set \"dataset\" / \"blobs\" in the config");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

fs::path prepare_out(const std::optional<fs::path>& out) {
  const fs::path dir = out ? *out : fs::path(".");
  fs::create_directories(dir);
  return dir;
}

json cooc_json(const Cooccurrence& c) {
  json rows = json::array();
  for (std::size_t y = 0; y < c.k; ++y) {
    json row = json::array();
    for (std::size_t j = 0; j < c.k; ++j) row.push_back(c.at(y, j));
    rows.push_back(row);
  }
  return rows;
}

int cmd_generate(const RunConfig& rc, const std::optional<fs::path>& data, std::uint64_t seed,
                 const std::optional<fs::path>& out) {
  const PLLDataset base = load_input(data, rc, seed);
  Rng rng(mix_seed(seed));
  PLLDataset ds = generate_candidates(base, rc.gen, rng);
  ds.comments.push_back(" generated by pllvi generate, seed " + std::to_string(seed) + ", gen " + to_json(rc.gen).dump());
  const fs::path dir = prepare_out(out);
  save_dataset(ds, dir / "dataset.pll");
  const Cooccurrence c = cooccurrence(ds);
  write_text(dir / "cooc.csv", c.to_csv(false));
  json report{{"command", "generate"},
              {"seed", seed},
              {"n", ds.n},
              {"d", ds.d},
              {"k", ds.k},
              {"mean_candidate_size", ds.mean_candidate_size()},
              {"gen", to_json(rc.gen)},
              {"cooccurrence", cooc_json(c)}};
  write_json_file(report, dir / "report.json");
  std::cout << "wrote " << (dir / "dataset.pll").string() << " (mean |s| = " << ds.mean_candidate_size() << ")\n";
  return 0;
}

int cmd_prior(const RunConfig& rc, const std::optional<fs::path>& data, std::uint64_t seed,
              const std::optional<fs::path>& out) {
  const PLLDataset ds = load_input(data, rc, seed);
  const PriorBounds bounds = bounds_from_dataset(ds);
  const PriorVector p = compute_prior(bounds, rc.train.delta);
  json j{{"pi", p.pi},
         {"alpha_pi", p.alpha_pi},
         {"delta", p.delta},
         {"lower", bounds.lower},
         {"upper", bounds.upper},
         {"binding_lower", p.binding_lower},
         {"binding_upper", p.binding_upper},
         {"entropy", entropy(p.pi)}};
  std::cout << j.dump(2) << '\n';
  if (out) write_json_file(j, prepare_out(out) / "report.json");
  return 0;
}

int cmd_train(const RunConfig& rc, const std::optional<fs::path>& data, std::uint64_t seed,
              const std::optional<fs::path>& out, bool ablation) {
  const PLLDataset ds = load_input(data, rc, seed);
  const fs::path dir = prepare_out(out);
  TrainConfig tc = rc.train;
  tc.seed = seed;
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = dir;
  std::ofstream metrics(dir / "metrics.csv");
  metrics << metrics_csv_header();
  FitHooks hooks;
  hooks.on_epoch = [&](const EpochMetrics& m) {
    metrics << metrics_csv_row(m);
    metrics.flush();
  };
  FitResult r = ablation ? fit_ablation(ds, {}, tc, hooks) : fit(ds, {}, tc, hooks);
  save_checkpoint(r, tc.T, dir / "model.json");
  json report{{"command", "train"}, {"method", ablation ? "vipll_ablation" : "vipll"}, {"config", to_json(tc)},
              {"n", ds.n}, {"prior", {{"pi", r.prior.pi}, {"alpha_pi", r.prior.alpha_pi}}}, {"sigma", r.cvae.sigma}};
  if (ds.true_labels) {
    const std::vector<std::size_t> ids = all_indices(ds.n);
    report["train_accuracy"] = accuracy(r.predict_labels(ds, ids), *ds.true_labels);
  }
  write_json_file(report, dir / "report.json");
  std::cout << "wrote " << (dir / "model.json").string() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& rc, const std::optional<fs::path>& data, std::uint64_t seed,
             const std::optional<fs::path>& out, const std::optional<fs::path>& model) {
  const PLLDataset ds = load_input(data, rc, seed);
  if (!ds.true_labels) throw ConfigError("eval needs a dataset with true labels");
  json report;
  if (model) {
    FitResult r = load_checkpoint(*model);
    const std::vector<std::size_t> ids = all_indices(ds.n);
    const double acc = accuracy(r.predict_labels(ds, ids), *ds.true_labels);
    report = json{{"command", "eval"}, {"model", model->string()}, {"accuracy", acc}, {"n", ds.n}};
  } else {
    std::vector<RunReport> reports;
    for (Method m : rc.methods) {
      ExperimentConfig ec = rc.experiment;
      ec.method = m;
      ec.seed = seed;
      ec.train = rc.train;
      reports.push_back(run_experiment(ds, ec));
      std::cerr << to_string(m) << ": " << reports.back().mean << " +- " << reports.back().std << '\n';
    }
    mark_significance(reports);
    json runs = json::array();
    for (const RunReport& r : reports) runs.push_back(r.to_json());
    report = json{{"command", "eval"}, {"seed", seed}, {"mean_candidate_size", ds.mean_candidate_size()}, {"runs", runs}};
  }
  std::cout << report.dump(2) << '\n';
  if (out) write_json_file(report, prepare_out(out) / "report.json");
  return 0;
}

int cmd_cooc(const RunConfig& rc, const std::optional<fs::path>& data, std::uint64_t seed,
             const std::optional<fs::path>& out) {
  const PLLDataset ds = load_input(data, rc, seed);
  const Cooccurrence c = cooccurrence(ds);
  const fs::path dir = prepare_out(out);
  write_text(dir / "cooc.csv", c.to_csv(false));
  write_text(dir / "cooc_normalized.csv", c.to_csv(true));
  std::cout << c.to_csv(false);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"variational partial-label learning"};
  app.require_subcommand(1);

  std::optional<fs::path> config_path, data_path, out_dir, model_path;
  std::uint64_t seed = 0;
  bool ablation = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--data", data_path, ".pll dataset")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed");
    sub->add_option("--out", out_dir, "output directory");
  };
  CLI::App* gen = app.add_subcommand("generate", "draw candidate sets from true labels");
  CLI::App* prior = app.add_subcommand("prior", "print the max-entropy prior as JSON");
  CLI::App* train = app.add_subcommand("train", "fit on all rows; writes model.json and metrics.csv");
  CLI::App* eval = app.add_subcommand("eval", "multi-seed split evaluation, or score a saved model");
  CLI::App* cooc = app.add_subcommand("cooc", "candidate co-occurrence matrix as CSV");
  for (CLI::App* sub : {gen, prior, train, eval, cooc}) add_common(sub);
  train->add_flag("--ablation", ablation, "train the discriminative ablation instead");
  eval->add_option("--model", model_path, "checkpoint written by train")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig rc = load_config(config_path);
    if (gen->parsed()) return cmd_generate(rc, data_path, seed, out_dir);
    if (prior->parsed()) return cmd_prior(rc, data_path, seed, out_dir);
    if (train->parsed()) return cmd_train(rc, data_path, seed, out_dir, ablation);
    if (eval->parsed()) return cmd_eval(rc, data_path, seed, out_dir, model_path);
    if (cooc->parsed()) return cmd_cooc(rc, data_path, seed, out_dir);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
