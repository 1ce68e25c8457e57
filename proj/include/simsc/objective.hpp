#pragma once

#include <cstddef>
#include <vector>

#include "simsc/matcher.hpp"
#include "simsc/tensor.hpp"

namespace simsc {

// Smoothed ground-truth matching distribution (sums to 1, support confined to
// the n_s x n_s integer cells nearest the sub-pixel center, clipped at grid
// borders).
struct GtDistribution {
    std::vector<double> data;  // h*w row-major probabilities
    std::size_t h = 0, w = 0;
    Point center;
    int n_s = 3;
    int n_k = 5;
};

struct LossConfig {
    double gamma = 0.2;
    double beta_thres = 0.1;
    int n_s = 3;
    int n_k = 5;
};

void validate_loss_config(const LossConfig& config);

// Gaussian with std floor(n_k/2) evaluated at the n_s x n_s cells centered on
// the integer cell nearest gt, zero elsewhere, normalized to sum 1.
GtDistribution make_gt_distribution(Point gt, std::size_t h, std::size_t w, int n_s, int n_k);

struct CeDiagnostics {
    // Cells with gt > 0 whose predicted probability underflowed to 0 and was
    // clamped at 1e-300.
    std::size_t clamped = 0;
};

// -sum_uv gt_uv * log softmax(scores)_uv with the softmax at beta=1 (any
// temperature rescaling lives inside the correlation entries). Stable
// log-sum-exp forward; backward is g*(p - gt). The caller averages over
// queries.
Tensor cross_entropy(const Tensor& score_map, const GtDistribution& gt,
                     CeDiagnostics* diagnostics = nullptr);

// Hinge max(0, -log beta + log beta_thres), subgradient 0 at
// beta == beta_thres. Applied to each partial temperature separately.
Tensor temperature_regularizer(const Tensor& beta, double beta_thres);
double temperature_regularizer_value(double beta, double beta_thres);

// ce + gamma * reg.
Tensor total_loss(const Tensor& ce, const Tensor& reg, double gamma);

}  // namespace simsc
