#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace simsc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// One record in the dynamic computation graph. Nodes are created by the op
// functions below and torn down when the last Tensor handle goes away.
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until backward touches this node
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<NodePtr> parents;
    // Reads this->grad and accumulates into the parents' grads.
    std::function<void(const TensorNode&)> backward;

    std::size_t numel() const { return data.size(); }
};

// Value-semantic handle to a graph node. Copying a Tensor aliases the node.
//
// Graphs are single-threaded: a tensor and everything reachable from it must
// stay on one thread, but fully disjoint graphs may live on parallel threads.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    // Factory for fused ops defined outside tensor.cpp. Validates the result
    // for NaN/Inf and drops the graph edges when no parent needs gradients.
    static Tensor from_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                          std::function<void(const TensorNode&)> backward, const char* op_name);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    std::uint64_t id() const { return node_->id; }

    const std::vector<double>& data() const { return node_->data; }
    double operator[](std::size_t i) const { return node_->data[i]; }
    // Single-element tensors only.
    double value() const;

    // In-place access for leaf tensors (parameters, test perturbations).
    // Mutating a non-leaf would desynchronize the recorded graph.
    std::vector<double>& leaf_data();

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Reverse-mode sweep from a scalar. Each reachable node is visited once;
    // afterwards every gradient is checked to be finite.
    void backward() const;

    NodePtr node() const { return node_; }

private:
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}
    NodePtr node_;
};

// For use inside backward rules: gradient buffer of parents[idx], allocated
// on demand; nullptr when that parent is constant.
std::vector<double>* grad_sink(const TensorNode& self, std::size_t idx);

// ---- element-wise / scalar ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor div_scalar(const Tensor& a, double c);
// Broadcast a single-element tensor over `a`; gradients reach both inputs.
Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s);
Tensor div_scalar_tensor(const Tensor& a, const Tensor& s);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// ---- reductions / structure ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // 2-D
Tensor matmul(const Tensor& a, const Tensor& b);
// a: m x n, bias: n. Adds bias to every row.
Tensor add_rowvec(const Tensor& a, const Tensor& bias);
// Spatial mean of a C x h x w map, one value per channel.
Tensor global_average_pool(const Tensor& a);
// Value barrier: forwards data, blocks gradient flow.
Tensor detach(const Tensor& a);

// ---- matching-specific primitives ----
// Rows of a 2-D tensor (or the whole 1-D tensor) rescaled to unit L2 norm.
// Vectors with norm <= eps are divided by eps instead, so the zero vector
// stays zero rather than producing NaN.
Tensor l2_normalize(const Tensor& a, double eps = 1e-8);

// softmax(z/beta) over all elements, max-subtracted. Differentiable in both
// z and beta (single-element tensor); beta <= 0 is a domain error.
Tensor softmax(const Tensor& z, const Tensor& beta);
Tensor softmax(const Tensor& z, double beta);

// 4-neighbour interpolation at (row, col) on an h x w grid (scalar result)
// or an h x w x D grid (D-vector result). Integer points return grid values
// exactly; out-of-bounds points are rejected.
Tensor bilinear_sample(const Tensor& grid, double row, double col);

// Non-overlapping r x r patches of a ch x H x W image, flattened into a
// (H/r * W/r) x (ch*r*r) matrix, one patch per row.
Tensor patchify(const Tensor& image, std::size_t ratio);

}  // namespace simsc
