#include "simsc/matcher.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace simsc {

namespace {

// C x h x w map to (h*w) x C matrix, one row per cell.
Tensor cells_by_channel(const FeatureMap& f) {
    const std::size_t c = f.channels(), hw = f.height() * f.width();
    return transpose(reshape(f.data, {c, hw}));
}

}  // namespace

CorrelationTensor build_correlation(const FeatureMap& fa, const FeatureMap& fb,
                                    Normalization normalization, const Tensor& beta_a,
                                    const Tensor& beta_b, double l2_eps) {
    if (fa.channels() != fb.channels()) {
        throw std::invalid_argument("build_correlation: channel mismatch, " +
                                    std::to_string(fa.channels()) + " vs " +
                                    std::to_string(fb.channels()));
    }
    if (beta_a.size() != 1 || beta_b.size() != 1) {
        throw std::invalid_argument("build_correlation: temperatures must be scalars");
    }
    if (beta_a[0] <= 0.0 || beta_b[0] <= 0.0) {
        throw std::domain_error("build_correlation: temperatures must be positive");
    }

    Tensor va = cells_by_channel(fa);
    Tensor vb = cells_by_channel(fb);
    if (normalization == Normalization::l2) {
        va = l2_normalize(va, l2_eps);
        vb = l2_normalize(vb, l2_eps);
    }
    va = div_scalar_tensor(va, beta_a);
    vb = div_scalar_tensor(vb, beta_b);

    CorrelationTensor out;
    out.data = matmul(va, transpose(vb));
    out.h_a = fa.height();
    out.w_a = fa.width();
    out.h_b = fb.height();
    out.w_b = fb.width();
    out.normalization = normalization;
    out.applied_scale = 1.0 / (beta_a[0] * beta_b[0]);
    return out;
}

CorrelationTensor build_correlation(const FeatureMap& fa, const FeatureMap& fb,
                                    Normalization normalization, double beta_a, double beta_b,
                                    double l2_eps) {
    return build_correlation(fa, fb, normalization, Tensor::scalar(beta_a),
                             Tensor::scalar(beta_b), l2_eps);
}

ScoreMap extract_score_map(const CorrelationTensor& c, Point query_feat) {
    const std::size_t target_cells = c.h_b * c.w_b;
    Tensor grid = reshape(c.data, {c.h_a, c.w_a, target_cells});
    Tensor row = bilinear_sample(grid, query_feat.row, query_feat.col);
    return ScoreMap{reshape(row, {c.h_b, c.w_b}), query_feat};
}

}  // namespace simsc
