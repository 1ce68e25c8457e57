#include "simsc/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace simsc {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'T', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
}

void put_f64(std::ofstream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw std::runtime_error("truncated tensor file: " + path);
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& in, const std::string& path) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw std::runtime_error("truncated tensor file: " + path);
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_smt(const std::string& path, const Shape& shape, const std::vector<double>& values) {
    if (shape_numel(shape) != values.size()) {
        throw std::invalid_argument("save_smt: " + std::to_string(values.size()) +
                                    " values for shape " + shape_str(shape));
    }
    for (std::size_t d : shape) {
        if (d > std::numeric_limits<std::uint32_t>::max()) {
            throw std::invalid_argument("save_smt: dimension too large for format");
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : values) put_f64(out, v);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

void save_smt(const std::string& path, const Tensor& tensor) {
    save_smt(path, tensor.shape(), tensor.data());
}

std::pair<Shape, std::vector<double>> load_smt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("not an SMT1 tensor file: " + path);
    }
    const std::uint32_t ndim = get_u32(in, path);
    if (ndim > 8) throw std::runtime_error("implausible tensor rank in " + path);
    Shape shape(ndim);
    for (auto& d : shape) d = get_u32(in, path);
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = get_f64(in, path);
    in.peek();
    if (!in.eof()) throw std::runtime_error("trailing bytes in tensor file: " + path);
    return {std::move(shape), std::move(values)};
}

Tensor load_smt_tensor(const std::string& path, bool requires_grad) {
    auto [shape, values] = load_smt(path);
    return Tensor::from_data(std::move(shape), std::move(values), requires_grad);
}

}  // namespace simsc
