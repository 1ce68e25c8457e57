#include "simsc/backbone.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace simsc {

namespace {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> values(fan_in * fan_out);
    for (auto& v : values) v = rng.uniform(-a, a);
    return Tensor::from_data({fan_in, fan_out}, std::move(values), true);
}

std::vector<std::pair<std::size_t, std::size_t>> layer_widths(const BackboneConfig& c) {
    std::vector<std::pair<std::size_t, std::size_t>> widths;
    widths.emplace_back(c.channels * c.ratio * c.ratio, c.embed_dim);
    std::size_t prev = c.embed_dim;
    for (std::size_t l = 0; l < c.layers; ++l) {
        widths.emplace_back(prev, c.feature_dim);
        prev = c.feature_dim;
    }
    return widths;
}

}  // namespace

Backbone::Backbone(const BackboneConfig& config, Rng& rng) : config_(config) {
    if (config.layers == 0) throw std::invalid_argument("backbone: needs at least one MLP layer");
    if (config.ratio == 0) throw std::invalid_argument("backbone: ratio must be positive");
    for (const auto& [fan_in, fan_out] : layer_widths(config)) {
        params_.push_back(xavier_uniform(fan_in, fan_out, rng));
        params_.push_back(Tensor::zeros({fan_out}, true));
    }
}

Backbone::Backbone(const BackboneConfig& config, std::vector<Tensor> params)
    : config_(config), params_(std::move(params)) {
    const auto widths = layer_widths(config);
    if (params_.size() != 2 * widths.size()) {
        throw std::invalid_argument("backbone: expected " + std::to_string(2 * widths.size()) +
                                    " parameter tensors, got " + std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const Shape want_w{widths[i].first, widths[i].second};
        const Shape want_b{widths[i].second};
        if (params_[2 * i].shape() != want_w || params_[2 * i + 1].shape() != want_b) {
            throw std::invalid_argument("backbone: parameter " + std::to_string(i) +
                                        " has unexpected shape");
        }
    }
}

FeatureMap Backbone::extract(const Image& img) const {
    if (img.channels != config_.channels) {
        throw std::invalid_argument("extract: image has " + std::to_string(img.channels) +
                                    " channels, backbone expects " +
                                    std::to_string(config_.channels));
    }
    if (img.height % config_.ratio != 0 || img.width % config_.ratio != 0) {
        throw std::invalid_argument("extract: image " + std::to_string(img.height) + "x" +
                                    std::to_string(img.width) + " not divisible by ratio " +
                                    std::to_string(config_.ratio));
    }
    const std::size_t h = img.height / config_.ratio;
    const std::size_t w = img.width / config_.ratio;

    Tensor x = patchify(img.data, config_.ratio);
    const std::size_t blocks = config_.layers + 1;
    for (std::size_t i = 0; i < blocks; ++i) {
        x = add_rowvec(matmul(x, params_[2 * i]), params_[2 * i + 1]);
        if (i + 1 < blocks) x = relu(x);
    }
    // (h*w) x C positions to C x h x w.
    Tensor features = reshape(transpose(x), {config_.feature_dim, h, w});
    return FeatureMap{std::move(features), config_.ratio};
}

std::vector<Tensor> Backbone::trainable_parameters(FinetuneScope scope) const {
    if (scope == FinetuneScope::full) return params_;
    return {params_.begin() + static_cast<std::ptrdiff_t>(last_block_boundary()), params_.end()};
}

}  // namespace simsc
