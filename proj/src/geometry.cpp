#include "simsc/geometry.hpp"

#include <sstream>
#include <stdexcept>

namespace simsc {

namespace {

double clamp_with_tolerance(double v, double lo, double hi, double tol, const char* axis) {
    if (v < lo - tol || v > hi + tol) {
        std::ostringstream msg;
        msg << "image_to_feature_coords: " << axis << " coordinate " << v
            << " outside feature grid [" << lo << ", " << hi << "]";
        throw std::out_of_range(msg.str());
    }
    return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace

Point image_to_feature_coords(Point p, std::size_t ratio, std::size_t feat_h, std::size_t feat_w) {
    if (ratio == 0) throw std::invalid_argument("image_to_feature_coords: zero ratio");
    const double r = static_cast<double>(ratio);
    Point f{(p.row + 0.5) / r - 0.5, (p.col + 0.5) / r - 0.5};
    f.row = clamp_with_tolerance(f.row, 0.0, static_cast<double>(feat_h - 1), 1e-9, "row");
    f.col = clamp_with_tolerance(f.col, 0.0, static_cast<double>(feat_w - 1), 1e-9, "col");
    return f;
}

Point feature_to_image_coords(Point f, std::size_t ratio) {
    if (ratio == 0) throw std::invalid_argument("feature_to_image_coords: zero ratio");
    const double r = static_cast<double>(ratio);
    return {(f.row + 0.5) * r - 0.5, (f.col + 0.5) * r - 0.5};
}

}  // namespace simsc
