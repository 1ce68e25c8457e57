#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simsc/geometry.hpp"

namespace simsc {

// Ordered keypoint pairs in image coordinates, with image sizes and an
// optional target bounding box.
struct CorrespondenceSet {
    std::vector<Point> points_a;
    std::vector<Point> points_b;
    std::size_t height_a = 0, width_a = 0;
    std::size_t height_b = 0, width_b = 0;
    std::optional<std::pair<double, double>> bbox_b;  // (height, width)
};

enum class ThresholdConvention { img, kps, bbox };

std::string threshold_convention_name(ThresholdConvention convention);
ThresholdConvention threshold_convention_from_name(const std::string& name);

// theta_img = max(H_B, W_B); theta_kps = max extent of the target keypoints;
// theta_bbox = max bounding-box side.
double base_threshold(const CorrespondenceSet& set, ThresholdConvention convention);

// Fraction of predictions with Euclidean error <= alpha * theta (boundary
// counted correct).
double pck(const std::vector<Point>& preds, const CorrespondenceSet& set, double alpha,
           double theta);

enum class AggregateMode { mean_over_pairs, mean_over_keypoints };

struct PckResult {
    std::string convention;
    std::vector<double> alphas;
    std::vector<double> per_alpha;               // aggregate per alpha
    std::vector<std::vector<double>> per_pair;   // [pair][alpha]
};

// per_pair[i][j]: PCK of pair i at alphas[j]; keypoint_counts weights the
// keypoints-mean mode. Default aggregation is the mean over pairs.
std::vector<double> aggregate(const std::vector<std::vector<double>>& per_pair,
                              const std::vector<std::size_t>& keypoint_counts,
                              AggregateMode mode = AggregateMode::mean_over_pairs);

std::string pck_result_to_json(const PckResult& result);

}  // namespace simsc
