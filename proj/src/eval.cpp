#include "simsc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace simsc {

std::string threshold_convention_name(ThresholdConvention convention) {
    switch (convention) {
        case ThresholdConvention::img: return "img";
        case ThresholdConvention::kps: return "kps";
        case ThresholdConvention::bbox: return "bbox";
    }
    throw std::logic_error("threshold_convention_name: unknown convention");
}

ThresholdConvention threshold_convention_from_name(const std::string& name) {
    if (name == "img") return ThresholdConvention::img;
    if (name == "kps") return ThresholdConvention::kps;
    if (name == "bbox") return ThresholdConvention::bbox;
    throw std::invalid_argument("unknown threshold convention: " + name);
}

double base_threshold(const CorrespondenceSet& set, ThresholdConvention convention) {
    switch (convention) {
        case ThresholdConvention::img:
            return static_cast<double>(std::max(set.height_b, set.width_b));
        case ThresholdConvention::kps: {
            if (set.points_b.empty()) {
                throw std::invalid_argument("base_threshold: kps convention needs >= 1 keypoint");
            }
            double min_r = set.points_b[0].row, max_r = min_r;
            double min_c = set.points_b[0].col, max_c = min_c;
            for (const Point& p : set.points_b) {
                min_r = std::min(min_r, p.row);
                max_r = std::max(max_r, p.row);
                min_c = std::min(min_c, p.col);
                max_c = std::max(max_c, p.col);
            }
            return std::max(max_r - min_r, max_c - min_c);
        }
        case ThresholdConvention::bbox:
            if (!set.bbox_b) {
                throw std::invalid_argument("base_threshold: bbox convention without a bbox");
            }
            return std::max(set.bbox_b->first, set.bbox_b->second);
    }
    throw std::logic_error("base_threshold: unknown convention");
}

double pck(const std::vector<Point>& preds, const CorrespondenceSet& set, double alpha,
           double theta) {
    if (preds.size() != set.points_b.size()) {
        throw std::invalid_argument("pck: " + std::to_string(preds.size()) +
                                    " predictions for " + std::to_string(set.points_b.size()) +
                                    " keypoints");
    }
    if (preds.empty()) throw std::invalid_argument("pck: empty correspondence set");
    if (alpha <= 0.0 || theta <= 0.0) throw std::domain_error("pck: alpha and theta must be > 0");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double dr = preds[i].row - set.points_b[i].row;
        const double dc = preds[i].col - set.points_b[i].col;
        if (std::sqrt(dr * dr + dc * dc) <= alpha * theta) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<double> aggregate(const std::vector<std::vector<double>>& per_pair,
                              const std::vector<std::size_t>& keypoint_counts,
                              AggregateMode mode) {
    if (per_pair.empty()) throw std::domain_error("aggregate: empty result set");
    const std::size_t n_alpha = per_pair[0].size();
    for (const auto& row : per_pair) {
        if (row.size() != n_alpha) throw std::invalid_argument("aggregate: ragged per-pair rows");
    }
    if (mode == AggregateMode::mean_over_keypoints && keypoint_counts.size() != per_pair.size()) {
        throw std::invalid_argument("aggregate: keypoint counts do not match pairs");
    }
    std::vector<double> out(n_alpha, 0.0);
    if (mode == AggregateMode::mean_over_pairs) {
        for (const auto& row : per_pair)
            for (std::size_t j = 0; j < n_alpha; ++j) out[j] += row[j];
        for (double& v : out) v /= static_cast<double>(per_pair.size());
    } else {
        double total_kps = 0.0;
        for (std::size_t i = 0; i < per_pair.size(); ++i) {
            const double n = static_cast<double>(keypoint_counts[i]);
            total_kps += n;
            for (std::size_t j = 0; j < n_alpha; ++j) out[j] += per_pair[i][j] * n;
        }
        if (total_kps == 0.0) throw std::domain_error("aggregate: zero keypoints");
        for (double& v : out) v /= total_kps;
    }
    return out;
}

std::string pck_result_to_json(const PckResult& result) {
    nlohmann::json j;
    j["convention"] = result.convention;
    j["alphas"] = result.alphas;
    j["per_alpha"] = result.per_alpha;
    j["per_pair"] = result.per_pair;
    return j.dump(2);
}

}  // namespace simsc
