#pragma once

#include <cstddef>

#include "simsc/backbone.hpp"
#include "simsc/geometry.hpp"
#include "simsc/tensor.hpp"

namespace simsc {

enum class Normalization { l2, none };

// Similarity table between every source and target feature cell. Row
// i*w_a + j holds the similarities of source cell (i, j) against all target
// cells. applied_scale records the 1/(beta_a*beta_b) rescaling baked into the
// entries (1 when none).
struct CorrelationTensor {
    Tensor data;  // (h_a*w_a) x (h_b*w_b)
    std::size_t h_a = 0, w_a = 0;
    std::size_t h_b = 0, w_b = 0;
    Normalization normalization = Normalization::l2;
    double applied_scale = 1.0;
};

// Per-query similarity slice over the target grid.
struct ScoreMap {
    Tensor data;  // h_b x w_b
    Point query;  // source point in feature coordinates
};

// Flattens both feature grids, optionally L2-normalizes each per-cell feature
// vector, divides by the per-image temperatures, and correlates. Differentiable
// end to end, including through the temperature tensors.
CorrelationTensor build_correlation(const FeatureMap& fa, const FeatureMap& fb,
                                    Normalization normalization, const Tensor& beta_a,
                                    const Tensor& beta_b, double l2_eps = 1e-8);
CorrelationTensor build_correlation(const FeatureMap& fa, const FeatureMap& fb,
                                    Normalization normalization, double beta_a = 1.0,
                                    double beta_b = 1.0, double l2_eps = 1e-8);

// Treats the correlation tensor as an h_a x w_a grid of row vectors and
// bilinearly samples at a continuous source query.
ScoreMap extract_score_map(const CorrelationTensor& c, Point query_feat);

}  // namespace simsc
