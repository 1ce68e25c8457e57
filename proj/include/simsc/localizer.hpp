#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "simsc/geometry.hpp"
#include "simsc/matcher.hpp"

namespace simsc {

struct LocalizerConfig {
    double sigma = 7.0;      // Gaussian mask std, in target feature cells
    double beta_eval = 1.0;  // 1 when temperature rescaling is baked into C
};

void validate_localizer_config(const LocalizerConfig& config);

// Kernel soft-argmax over a raw score map: Gaussian mask centered at the
// argmax (ties broken at the smallest row-major index), element-wise multiply,
// softmax at beta_eval, probability-weighted coordinate expectation.
// Inference-only, so it works on plain values rather than graph tensors.
Point kernel_soft_argmax(const std::vector<double>& m, std::size_t h, std::size_t w,
                         const LocalizerConfig& config);
Point kernel_soft_argmax(const ScoreMap& m, const LocalizerConfig& config);

// Argmax cell with the same row-major tie-break.
std::pair<std::size_t, std::size_t> nearest_neighbor_argmax(const std::vector<double>& m,
                                                            std::size_t h, std::size_t w);
std::pair<std::size_t, std::size_t> nearest_neighbor_argmax(const ScoreMap& m);

// Full inference path: image-A query -> feature coords -> score map ->
// kernel soft-argmax -> image-B coords.
Point predict_correspondence(const CorrelationTensor& c, Point query_img, std::size_t ratio_a,
                             std::size_t ratio_b, const LocalizerConfig& config);

}  // namespace simsc
