#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simsc/backbone.hpp"
#include "simsc/eval.hpp"
#include "simsc/localizer.hpp"
#include "simsc/matcher.hpp"
#include "simsc/synthdata.hpp"
#include "simsc/temperature.hpp"

namespace simsc {

std::string normalization_name(Normalization normalization);
Normalization normalization_from_name(const std::string& name);

struct ModelConfig {
    BackboneConfig backbone;
    TemperatureConfig temperature;
    Normalization normalization = Normalization::l2;
};

// Backbone + temperature predictor + the matcher's normalization switch.
struct Model {
    ModelConfig config;
    Backbone backbone;
    TemperatureModule temperature;

    std::vector<Tensor> parameters() const;
    std::vector<Tensor> trainable_parameters(FinetuneScope scope) const;
};

Model make_model(const ModelConfig& config, std::uint64_t seed);

// Weights directory: manifest.json (architecture, seed, parameter order and
// shapes) plus one SMT1 file per parameter. Loading rebuilds an identical
// model; save(load(dir)) reproduces the files byte for byte.
void save_model(const std::string& dir, const Model& model, std::uint64_t seed);
Model load_model(const std::string& dir);

// Features -> effective temperatures -> correlation, as used by both training
// and inference. The temperature rescaling is baked into the entries.
CorrelationTensor model_correlation(const Model& model, const Image& a, const Image& b);

struct EvalOptions {
    std::vector<double> alphas{0.05, 0.1, 0.15};
    ThresholdConvention convention = ThresholdConvention::img;
    LocalizerConfig localizer;
    AggregateMode aggregate = AggregateMode::mean_over_pairs;
};

PckResult evaluate_model(const Model& model, const Dataset& data, const EvalOptions& options);

// Same as evaluate_model across several localizer temperatures; feature
// extraction and correlation run once per pair.
std::vector<PckResult> evaluate_model_sweep(const Model& model, const Dataset& data,
                                            const EvalOptions& options,
                                            const std::vector<double>& beta_evals);

}  // namespace simsc
