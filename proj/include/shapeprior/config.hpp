#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "shapeprior/inference.hpp"
#include "shapeprior/synth.hpp"
#include "shapeprior/trainer.hpp"

namespace shapeprior {

// invalid configuration or usage; the CLI maps this to exit code 2
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AppConfig {
  PopulationSpec pop;
  TrainConfig train;
  InferConfig infer;
  double threshold_quantile = 5.0;
  int k = 5;
  std::uint64_t seed = 0;
};

// flat key=value file; '#' starts a comment; later keys override earlier
// ones; unknown keys are an error
void apply_config_key(AppConfig& cfg, const std::string& key,
                      const std::string& value);
void load_config_file(AppConfig& cfg, const std::filesystem::path& path);

// checks every field; throws ConfigError before anything touches disk
void validate_config(const AppConfig& cfg);

// flattened snapshot with the same keys the file format accepts
std::map<std::string, std::string> config_snapshot(const AppConfig& cfg);

} // namespace shapeprior
