#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "simsc/rng.hpp"
#include "simsc/tensor.hpp"

namespace simsc {

// Pixel image with values in [0,1], data laid out channels x H x W.
struct Image {
    std::size_t channels = 1;
    std::size_t height = 0;
    std::size_t width = 0;
    Tensor data;
};

// Dense descriptor grid, data laid out C x h x w, with the image-to-feature
// spatial ratio r (h = H/r, w = W/r).
struct FeatureMap {
    Tensor data;
    std::size_t ratio = 1;

    std::size_t channels() const { return data.shape()[0]; }
    std::size_t height() const { return data.shape()[1]; }
    std::size_t width() const { return data.shape()[2]; }
};

struct BackboneConfig {
    std::size_t channels = 1;
    std::size_t ratio = 8;
    std::size_t embed_dim = 32;   // patch-embedding width C0
    std::size_t layers = 3;       // MLP layers after the embedding
    std::size_t feature_dim = 64; // output channel width C
};

enum class FinetuneScope { last_block, full };

// Patchify-plus-MLP feature extractor: non-overlapping r x r patches are
// flattened, linearly embedded to C0, then passed per position through
// `layers` MLP layers (ReLU between layers, final layer linear) ending at
// width C. Parameters are ordered [W_embed, b_embed, W_1, b_1, ..., W_L, b_L];
// the last layer's pair forms the "last block".
class Backbone {
public:
    // Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
    Backbone(const BackboneConfig& config, Rng& rng);
    Backbone(const BackboneConfig& config, std::vector<Tensor> params);

    FeatureMap extract(const Image& img) const;

    const std::vector<Tensor>& parameters() const { return params_; }
    std::vector<Tensor> trainable_parameters(FinetuneScope scope) const;
    std::size_t last_block_boundary() const { return 2 * config_.layers; }
    const BackboneConfig& config() const { return config_; }

private:
    BackboneConfig config_;
    std::vector<Tensor> params_;
};

}  // namespace simsc
