#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simsc/backbone.hpp"
#include "simsc/eval.hpp"
#include "simsc/geometry.hpp"
#include "simsc/rng.hpp"

namespace simsc {

struct SynthConfig {
    std::size_t size = 64;  // square canvas, divisible by ratio
    std::size_t channels = 1;
    std::size_t ratio = 8;  // backbone ratio, sets keypoint margins/spread
    std::size_t min_keypoints = 4;
    std::size_t max_keypoints = 8;
    // Warp parameter ranges (image A -> image B displacements, pixels/radians).
    double max_rotation = 0.25;
    double max_log_scale = 0.12;
    double max_translation = 5.0;
    double rbf_amplitude = 2.5;
    double rbf_sigma = 16.0;
    std::size_t rbf_controls = 3;
    double max_displacement_fraction = 0.45;
    // Per-image photometric jitter.
    bool photometric = true;
    double brightness_jitter = 0.18;
    double contrast_jitter = 0.25;
};

// Invertible warp stored as the target-to-source map x = W(y):
// x = A (y - c) + c + t + sum_j a_j exp(-|y - c_j|^2 / (2 sigma_j^2)).
// Rendering image B then needs no inversion; keypoint targets invert the map
// by fixed-point iteration (the RBF part is a contraction by construction).
struct Warp {
    std::string kind;  // "affine" or "thin_perturbation"
    double a00 = 1, a01 = 0, a10 = 0, a11 = 1;
    double t_row = 0, t_col = 0;
    double center_row = 0, center_col = 0;
    struct Control {
        double row, col, amp_row, amp_col, sigma;
    };
    std::vector<Control> controls;

    Point to_source(Point in_b) const;
    // Solves to_source(q) == in_a for q; |residual| < 1e-12.
    Point to_target(Point in_a) const;
};

struct SynthPair {
    Image image_a, image_b;
    std::vector<Point> keypoints_a, keypoints_b;
    std::pair<double, double> bbox_b;  // (height, width) of target keypoint extent
    Warp warp;
    std::uint64_t seed = 0;
};

// Deterministic in (seed, config). Textures are multi-scale random blobs;
// even seeds get pure affine warps, odd seeds affine plus RBF perturbation.
// Throws std::runtime_error when 100 keypoint-sampling attempts fail.
SynthPair generate_pair(std::uint64_t seed, const SynthConfig& config);

// Loaded dataset pair (images materialized from their SMT1 files).
struct DatasetPair {
    std::string id;
    Image image_a, image_b;
    std::vector<Point> keypoints_a, keypoints_b;
    std::optional<std::pair<double, double>> bbox_b;
};

struct Dataset {
    std::vector<DatasetPair> pairs;
};

// Writes train/val/test JSON plus an images/ directory of SMT1 files under
// out_dir. Splits draw from disjoint seed ranges derived from seed.
void generate_split(std::uint64_t seed, std::size_t n_train, std::size_t n_val,
                    std::size_t n_test, const SynthConfig& config, const std::string& out_dir);

// Reads a dataset JSON (ours or any externally produced file with the same
// layout); image paths resolve relative to the JSON's directory.
Dataset load_dataset(const std::string& json_path);

CorrespondenceSet to_correspondence_set(const DatasetPair& pair);

}  // namespace simsc
