#pragma once

#include <string>
#include <utility>
#include <vector>

#include "simsc/tensor.hpp"

namespace simsc {

// SMT1 tensor container: ASCII magic "SMT1", then the rank as a u32, the
// dimensions as u32s, and the values as f64s, all little-endian.
void save_smt(const std::string& path, const Shape& shape, const std::vector<double>& values);
void save_smt(const std::string& path, const Tensor& tensor);

std::pair<Shape, std::vector<double>> load_smt(const std::string& path);
Tensor load_smt_tensor(const std::string& path, bool requires_grad = false);

}  // namespace simsc
