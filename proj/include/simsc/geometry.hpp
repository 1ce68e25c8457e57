#pragma once

#include <cstddef>

namespace simsc {

// (row, col) point; the same struct serves image and feature coordinates.
struct Point {
    double row = 0.0;
    double col = 0.0;
};

// Cell-center convention: feature = (p + 0.5)/r - 0.5, so integer feature
// coordinates land on patch centers and the round trip is exact.
// Results within 1e-9 outside the grid are clamped to the border; anything
// farther out is rejected.
Point image_to_feature_coords(Point p, std::size_t ratio, std::size_t feat_h, std::size_t feat_w);
Point feature_to_image_coords(Point f, std::size_t ratio);

}  // namespace simsc
