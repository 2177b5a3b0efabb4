#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "pllvi/data.hpp"
#include "pllvi/training.hpp"

namespace pllvi {

// Unknown key, wrong type, or an out-of-range value in a JSON config.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const GenSpec& g);
nlohmann::json to_json(const SupervisedConfig& c);

// Overlay the keys present in j onto base; every other field keeps its value.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
GenSpec gen_spec_from_json(const nlohmann::json& j, GenSpec base = {});
SupervisedConfig supervised_config_from_json(const nlohmann::json& j, SupervisedConfig base = {});

std::string to_string(DirichletSampler s);
DirichletSampler sampler_from_string(const std::string& s);
std::string to_string(GenStrategy s);
GenStrategy strategy_from_string(const std::string& s);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace pllvi
