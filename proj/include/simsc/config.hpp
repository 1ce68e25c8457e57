#pragma once

#include <string>

#include "simsc/train.hpp"

namespace simsc {

// Experiment file: training hyperparameters plus optional data/out paths
// (CLI flags override the file). Unknown keys are rejected to catch typos.
struct ExperimentConfig {
    TrainConfig train;
    std::string data, out;
};

// Parses and validates the experiment JSON text; `where` names the source in
// error messages. Malformed JSON or bad values raise invalid_argument /
// domain_error.
ExperimentConfig experiment_config_from_json(const std::string& text,
                                             const std::string& where = "config");

// Reads the file, then parses as above. Missing file raises runtime_error.
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace simsc
