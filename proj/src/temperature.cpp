#include "simsc/temperature.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace simsc {

std::string temp_mode_name(TempMode mode) {
    switch (mode) {
        case TempMode::learned_mlp: return "learned_mlp";
        case TempMode::single_param: return "single_param";
        case TempMode::manual: return "manual";
        case TempMode::unit: return "unit";
    }
    throw std::logic_error("temp_mode_name: unknown mode");
}

TempMode temp_mode_from_name(const std::string& name) {
    if (name == "learned_mlp") return TempMode::learned_mlp;
    if (name == "single_param") return TempMode::single_param;
    if (name == "manual") return TempMode::manual;
    if (name == "unit") return TempMode::unit;
    throw std::invalid_argument("unknown temperature mode: " + name);
}

void validate_temperature_config(const TemperatureConfig& config) {
    if (config.mode == TempMode::manual || config.mode == TempMode::single_param) {
        if (config.value <= 0.0 || config.value > 1.0) {
            throw std::domain_error("temperature: " + temp_mode_name(config.mode) +
                                    " value must lie in (0,1], got " +
                                    std::to_string(config.value));
        }
    }
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TemperatureModule::TemperatureModule(const TemperatureConfig& config, std::size_t channels,
                                     Rng& rng)
    : config_(config), channels_(channels) {
    validate_temperature_config(config);
    if (config.mode == TempMode::learned_mlp) {
        const double a = std::sqrt(6.0 / static_cast<double>(2 * channels));
        std::vector<double> w1(channels * channels);
        for (auto& v : w1) v = rng.uniform(-a, a);
        params_.push_back(Tensor::from_data({channels, channels}, std::move(w1), true));
        params_.push_back(Tensor::zeros({channels}, true));
        params_.push_back(Tensor::zeros({channels, 1}, true));
        params_.push_back(Tensor::zeros({1}, true));
    } else if (config.mode == TempMode::single_param) {
        const double init = config.value >= 1.0 ? logit(1.0 - 1e-9) : logit(config.value);
        params_.push_back(Tensor::from_data({1}, {init}, true));
    }
}

TemperatureModule::TemperatureModule(const TemperatureConfig& config, std::size_t channels,
                                     std::vector<Tensor> params)
    : config_(config), channels_(channels), params_(std::move(params)) {
    validate_temperature_config(config);
    std::size_t want = 0;
    if (config.mode == TempMode::learned_mlp) want = 4;
    if (config.mode == TempMode::single_param) want = 1;
    if (params_.size() != want) {
        throw std::invalid_argument("temperature: expected " + std::to_string(want) +
                                    " parameter tensors for mode " + temp_mode_name(config.mode) +
                                    ", got " + std::to_string(params_.size()));
    }
    if (config.mode == TempMode::learned_mlp) {
        if (params_[0].shape() != Shape{channels, channels} ||
            params_[1].shape() != Shape{channels} ||
            params_[2].shape() != Shape{channels, 1} || params_[3].shape() != Shape{1}) {
            throw std::invalid_argument("temperature: MLP parameter shapes do not match channels");
        }
    }
}

Tensor TemperatureModule::predict_partial_temperature(const FeatureMap& f) const {
    if (config_.mode != TempMode::learned_mlp) {
        throw std::logic_error("predict_partial_temperature: module is not in learned_mlp mode");
    }
    if (f.channels() != channels_) {
        throw std::invalid_argument("predict_partial_temperature: feature has " +
                                    std::to_string(f.channels()) + " channels, module expects " +
                                    std::to_string(channels_));
    }
    Tensor pooled = global_average_pool(detach(f.data));   // {C}
    Tensor hidden = relu(add(matmul(reshape(pooled, {1, channels_}), params_[0]),
                             reshape(params_[1], {1, channels_})));
    Tensor out = add(matmul(hidden, params_[2]), reshape(params_[3], {1, 1}));
    return reshape(sigmoid(out), {1});
}

std::pair<Tensor, Tensor> TemperatureModule::effective_temperature(const FeatureMap& fa,
                                                                   const FeatureMap& fb) const {
    switch (config_.mode) {
        case TempMode::learned_mlp:
            return {predict_partial_temperature(fa), predict_partial_temperature(fb)};
        case TempMode::single_param: {
            Tensor beta_c = sigmoid(params_[0]);
            return {beta_c, beta_c};
        }
        case TempMode::manual: {
            const double side = std::sqrt(config_.value);
            return {Tensor::scalar(side), Tensor::scalar(side)};
        }
        case TempMode::unit:
            return {Tensor::scalar(1.0), Tensor::scalar(1.0)};
    }
    throw std::logic_error("effective_temperature: unknown mode");
}

std::vector<Tensor> TemperatureModule::parameters() const { return params_; }

}  // namespace simsc
