#include "pllvi/config.hpp"

#include <fstream>
#include <set>

namespace pllvi {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError(section + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

void read_count(const json& j, const char* key, std::size_t& out, const std::string& section) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(section + "." + key + ": expected a non-negative integer");
  out = v.get<std::size_t>();
}

}  // namespace

std::string to_string(DirichletSampler s) {
  return s == DirichletSampler::inverse_cdf ? "inverse_cdf" : "marsaglia_tsang";
}

DirichletSampler sampler_from_string(const std::string& s) {
  if (s == "marsaglia_tsang") return DirichletSampler::marsaglia_tsang;
  if (s == "inverse_cdf") return DirichletSampler::inverse_cdf;
  throw ConfigError("unknown sampler '" + s + "'");
}

std::string to_string(GenStrategy s) { return s == GenStrategy::instance_dependent ? "instance_dependent" : "longtail_mix"; }

GenStrategy strategy_from_string(const std::string& s) {
  if (s == "instance_dependent") return GenStrategy::instance_dependent;
  if (s == "longtail_mix") return GenStrategy::longtail_mix;
  throw ConfigError("unknown strategy '" + s + "'");
}

json to_json(const TrainConfig& c) {
  return json{{"T", c.T},
              {"T_w", c.T_w},
              {"n_m", c.n_m},
              {"b", c.b},
              {"b_prime", c.b_prime},
              {"beta", c.beta},
              {"delta", c.delta},
              {"lr", c.lr},
              {"m", c.m},
              {"hidden", c.hidden},
              {"seed", c.seed},
              {"sampler", to_string(c.sampler)},
              {"ablation_concentration", c.ablation_concentration},
              {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  const std::string sec = "train";
  reject_unknown(j,
                 {"T", "T_w", "n_m", "b", "b_prime", "beta", "delta", "lr", "m", "hidden", "seed", "sampler",
                  "ablation_concentration", "checkpoint_every"},
                 sec);
  read_count(j, "T", c.T, sec);
  read_count(j, "T_w", c.T_w, sec);
  read_count(j, "n_m", c.n_m, sec);
  read_count(j, "b", c.b, sec);
  read_count(j, "b_prime", c.b_prime, sec);
  read(j, "beta", c.beta, sec);
  read(j, "delta", c.delta, sec);
  read(j, "lr", c.lr, sec);
  read_count(j, "m", c.m, sec);
  read_count(j, "hidden", c.hidden, sec);
  read(j, "seed", c.seed, sec);
  if (j.contains("sampler")) {
    std::string s;
    read(j, "sampler", s, sec);
    c.sampler = sampler_from_string(s);
  }
  read(j, "ablation_concentration", c.ablation_concentration, sec);
  read_count(j, "checkpoint_every", c.checkpoint_every, sec);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const SupervisedConfig& c) {
  return json{{"epochs", c.epochs}, {"hidden", c.hidden}, {"batch_size", c.batch_size}, {"lr", c.lr}};
}

SupervisedConfig supervised_config_from_json(const json& j, SupervisedConfig c) {
  const std::string sec = "probe";
  reject_unknown(j, {"epochs", "hidden", "batch_size", "lr"}, sec);
  read_count(j, "epochs", c.epochs, sec);
  read_count(j, "hidden", c.hidden, sec);
  read_count(j, "batch_size", c.batch_size, sec);
  read(j, "lr", c.lr, sec);
  if (c.hidden == 0 || c.batch_size == 0 || !(c.lr > 0.0)) throw ConfigError("probe: hidden, batch_size and lr must be positive");
  return c;
}

json to_json(const GenSpec& g) {
  json j{{"strategy", to_string(g.strategy)},
         {"mix_weights", {g.mix_instance, g.mix_longtail}},
         {"tail_base", g.tail_base},
         {"probe_seed", g.probe_seed},
         {"probe", to_json(g.probe)}};
  j["permutation"] = g.permutation ? json(*g.permutation) : json(nullptr);
  return j;
}

GenSpec gen_spec_from_json(const json& j, GenSpec g) {
  const std::string sec = "gen";
  reject_unknown(j, {"strategy", "mix_weights", "tail_base", "probe_seed", "permutation", "probe"}, sec);
  if (j.contains("strategy")) {
    std::string s;
    read(j, "strategy", s, sec);
    g.strategy = strategy_from_string(s);
  }
  if (j.contains("mix_weights")) {
    std::vector<double> w;
    read(j, "mix_weights", w, sec);
    if (w.size() != 2) throw ConfigError("gen.mix_weights: expected two weights");
    g.mix_instance = w[0];
    g.mix_longtail = w[1];
  }
  read(j, "tail_base", g.tail_base, sec);
  read(j, "probe_seed", g.probe_seed, sec);
  if (j.contains("permutation")) {
    if (j.at("permutation").is_null()) {
      g.permutation.reset();
    } else {
      std::vector<std::size_t> p;
      read(j, "permutation", p, sec);
      g.permutation = std::move(p);
    }
  }
  if (j.contains("probe")) g.probe = supervised_config_from_json(j.at("probe"), g.probe);
  try {
    g.validate(g.permutation ? g.permutation->size() : 0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace pllvi
