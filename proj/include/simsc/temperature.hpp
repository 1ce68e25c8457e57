#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "simsc/backbone.hpp"
#include "simsc/tensor.hpp"

namespace simsc {

enum class TempMode { learned_mlp, single_param, manual, unit };

std::string temp_mode_name(TempMode mode);
TempMode temp_mode_from_name(const std::string& name);

struct TemperatureConfig {
    TempMode mode = TempMode::learned_mlp;
    // manual: beta_trn in (0,1]; single_param: initial beta_c in (0,1].
    double value = 0.5;
};

void validate_temperature_config(const TemperatureConfig& config);

// Temperature predictor g(.). The learned MLP path computes
// sigmoid(W2' * relu(W1' * gap(detach(F)) + b1) + b2); detach keeps the
// temperature loss from reaching the backbone. The single-parameter variant
// stores one raw scalar mapped through the same sigmoid so beta_c stays in
// (0,1) without constrained optimization.
class TemperatureModule {
public:
    // W1 Xavier-initialized, b1 zero, W2 and b2 zero so training starts at
    // beta = 0.5 per side; the single-parameter raw value is placed so that
    // sigmoid(raw) equals the configured initial beta_c.
    TemperatureModule(const TemperatureConfig& config, std::size_t channels, Rng& rng);
    TemperatureModule(const TemperatureConfig& config, std::size_t channels,
                      std::vector<Tensor> params);

    // Learned-MLP forward for one feature map; strictly in (0,1).
    Tensor predict_partial_temperature(const FeatureMap& f) const;

    // (beta_a, beta_b) per mode: learned_mlp -> (g(Fa), g(Fb));
    // single_param -> (beta_c, beta_c); manual(beta) -> (sqrt(beta), sqrt(beta));
    // unit -> (1, 1). Learned modes return graph-connected tensors.
    std::pair<Tensor, Tensor> effective_temperature(const FeatureMap& fa,
                                                    const FeatureMap& fb) const;

    std::vector<Tensor> parameters() const;
    const TemperatureConfig& config() const { return config_; }
    std::size_t channels() const { return channels_; }

private:
    TemperatureConfig config_;
    std::size_t channels_ = 0;
    // learned_mlp: [W1 (CxC), b1 (C), W2 (Cx1), b2 (1)]; single_param: [raw (1)].
    std::vector<Tensor> params_;
};

}  // namespace simsc
