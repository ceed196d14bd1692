#pragma once

// Experiment configuration: JSON text with a fixed key set, validated with
// key-path error messages. Unknown keys are rejected.

#include <cstdint>
#include <string>

#include "tsgen/model.hpp"
#include "tsgen/simulate.hpp"

namespace tsgen {

enum class Algorithm { jst, ckf, both, obs_ckf };

struct ExperimentConfig {
  EnsembleConfig ensemble;
  Algorithm algorithm = Algorithm::both;
  std::string reduction = "none";  // none | common-mode-projection
  int paths = 1;
  NoiseSeeds seeds;
  std::string out_dir = ".";
};

// Parses and validates a JSON config (// comments allowed). Throws
// std::invalid_argument naming the offending key path.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config_file(const std::string& path);

const char* algorithm_name(Algorithm a);

}  // namespace tsgen
