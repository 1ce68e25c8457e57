#include "simsc/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace simsc {

void validate_localizer_config(const LocalizerConfig& config) {
    if (config.sigma <= 0.0) throw std::domain_error("localizer: sigma must be positive");
    if (config.beta_eval <= 0.0) throw std::domain_error("localizer: beta_eval must be positive");
}

namespace {

void check_map(const std::vector<double>& m, std::size_t h, std::size_t w, const char* op) {
    if (h == 0 || w == 0 || m.size() != h * w) {
        throw std::invalid_argument(std::string(op) + ": map size does not match " +
                                    std::to_string(h) + " x " + std::to_string(w));
    }
    for (double v : m) {
        if (!std::isfinite(v)) throw std::runtime_error(std::string(op) + ": non-finite score");
    }
}

}  // namespace

Point kernel_soft_argmax(const std::vector<double>& m, std::size_t h, std::size_t w,
                         const LocalizerConfig& config) {
    validate_localizer_config(config);
    check_map(m, h, w, "kernel_soft_argmax");

    std::size_t best = 0;
    for (std::size_t i = 1; i < m.size(); ++i) {
        if (m[i] > m[best]) best = i;
    }
    const double center_r = static_cast<double>(best / w);
    const double center_c = static_cast<double>(best % w);
    const double inv_two_sigma_sq = 1.0 / (2.0 * config.sigma * config.sigma);

    std::vector<double> masked(m.size());
    double masked_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < h; ++k) {
        const double dr = static_cast<double>(k) - center_r;
        for (std::size_t l = 0; l < w; ++l) {
            const double dc = static_cast<double>(l) - center_c;
            const double g = std::exp(-(dr * dr + dc * dc) * inv_two_sigma_sq);
            masked[k * w + l] = g * m[k * w + l];
            masked_max = std::max(masked_max, masked[k * w + l]);
        }
    }

    double total = 0.0;
    double exp_r = 0.0, exp_c = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t l = 0; l < w; ++l) {
            const double p = std::exp((masked[k * w + l] - masked_max) / config.beta_eval);
            total += p;
            exp_r += p * static_cast<double>(k);
            exp_c += p * static_cast<double>(l);
        }
    }
    return {exp_r / total, exp_c / total};
}

Point kernel_soft_argmax(const ScoreMap& m, const LocalizerConfig& config) {
    const auto& shape = m.data.shape();
    return kernel_soft_argmax(m.data.data(), shape[0], shape[1], config);
}

std::pair<std::size_t, std::size_t> nearest_neighbor_argmax(const std::vector<double>& m,
                                                            std::size_t h, std::size_t w) {
    check_map(m, h, w, "nearest_neighbor_argmax");
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.size(); ++i) {
        if (m[i] > m[best]) best = i;
    }
    return {best / w, best % w};
}

std::pair<std::size_t, std::size_t> nearest_neighbor_argmax(const ScoreMap& m) {
    const auto& shape = m.data.shape();
    return nearest_neighbor_argmax(m.data.data(), shape[0], shape[1]);
}

Point predict_correspondence(const CorrelationTensor& c, Point query_img, std::size_t ratio_a,
                             std::size_t ratio_b, const LocalizerConfig& config) {
    const Point query_feat = image_to_feature_coords(query_img, ratio_a, c.h_a, c.w_a);
    const ScoreMap m = extract_score_map(c, query_feat);
    const Point target_feat = kernel_soft_argmax(m, config);
    return feature_to_image_coords(target_feat, ratio_b);
}

}  // namespace simsc
