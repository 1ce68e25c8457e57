#include "simsc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace simsc {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

void check_finite(const std::vector<double>& values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value produced by ") + what);
        }
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}

void check_scalar(const Tensor& s, const char* op) {
    if (s.size() != 1) {
        throw std::invalid_argument(std::string(op) + ": expected single-element tensor, got " +
                                    shape_str(s.shape()));
    }
}

}  // namespace

std::vector<double>* grad_sink(const TensorNode& self, std::size_t idx) {
    TensorNode& p = *self.parents[idx];
    if (!p.requires_grad) return nullptr;
    if (p.grad.empty()) p.grad.assign(p.data.size(), 0.0);
    return &p.grad;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("from_data: " + std::to_string(data.size()) +
                                    " values for shape " + shape_str(shape));
    }
    check_finite(data, "from_data");
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::from_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                       std::function<void(const TensorNode&)> backward, const char* op_name) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument(std::string(op_name) + ": result size mismatch");
    }
    check_finite(data, op_name);
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    bool any_grad = false;
    for (const Tensor& p : parents) {
        if (!p.defined()) throw std::invalid_argument(std::string(op_name) + ": undefined input");
        any_grad = any_grad || p.requires_grad();
    }
    node->requires_grad = any_grad;
    if (any_grad) {
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

double Tensor::value() const {
    if (size() != 1) {
        throw std::invalid_argument("value: tensor has " + std::to_string(size()) + " elements");
    }
    return node_->data[0];
}

std::vector<double>& Tensor::leaf_data() {
    if (node_->backward || !node_->parents.empty()) {
        throw std::logic_error("leaf_data: tensor is not a leaf");
    }
    return node_->data;
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) {
        throw std::logic_error("grad: no gradient recorded; call backward() first");
    }
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::backward() const {
    if (!defined()) throw std::logic_error("backward: undefined tensor");
    if (size() != 1) {
        throw std::invalid_argument("backward: root must be a single-element tensor, got " +
                                    shape_str(shape()));
    }
    if (!node_->requires_grad) {
        throw std::logic_error("backward: root does not require gradients");
    }

    // Iterative postorder DFS; reversed postorder is a valid topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<const TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        bool descended = false;
        while (next_child < node->parents.size()) {
            TensorNode* parent = node->parents[next_child++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }

    if (node_->grad.empty()) node_->grad.assign(1, 0.0);
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
    for (TensorNode* node : order) {
        if (!node->grad.empty()) check_finite(node->grad, "backward");
    }
}

// ---------------------------------------------------------------------------
// element-wise / scalar ops

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return Tensor::from_op(
        a.shape(), std::move(out), {a, b},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
            if (auto* gb = grad_sink(self, 1))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] += self.grad[i];
        },
        "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return Tensor::from_op(
        a.shape(), std::move(out), {a, b},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
            if (auto* gb = grad_sink(self, 1))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] -= self.grad[i];
        },
        "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return Tensor::from_op(
        a.shape(), std::move(out), {a, b},
        [](const TensorNode& self) {
            const auto& pa = self.parents[0]->data;
            const auto& pb = self.parents[1]->data;
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * pb[i];
            if (auto* gb = grad_sink(self, 1))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] += self.grad[i] * pa[i];
        },
        "mul");
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + c;
    return Tensor::from_op(
        a.shape(), std::move(out), {a},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
        },
        "add_scalar");
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
    return Tensor::from_op(
        a.shape(), std::move(out), {a},
        [c](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * c;
        },
        "mul_scalar");
}

Tensor div_scalar(const Tensor& a, double c) {
    if (c == 0.0) throw std::domain_error("div_scalar: division by zero");
    return mul_scalar(a, 1.0 / c);
}

Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
    check_scalar(s, "mul_scalar_tensor");
    const double sv = s[0];
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * sv;
    return Tensor::from_op(
        a.shape(), std::move(out), {a, s},
        [](const TensorNode& self) {
            const auto& pa = self.parents[0]->data;
            const double sv = self.parents[1]->data[0];
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * sv;
            if (auto* gs = grad_sink(self, 1)) {
                double acc = 0.0;
                for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa[i];
                (*gs)[0] += acc;
            }
        },
        "mul_scalar_tensor");
}

Tensor div_scalar_tensor(const Tensor& a, const Tensor& s) {
    check_scalar(s, "div_scalar_tensor");
    const double sv = s[0];
    if (sv == 0.0) throw std::domain_error("div_scalar_tensor: division by zero");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / sv;
    return Tensor::from_op(
        a.shape(), std::move(out), {a, s},
        [](const TensorNode& self) {
            const auto& pa = self.parents[0]->data;
            const double sv = self.parents[1]->data[0];
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] / sv;
            if (auto* gs = grad_sink(self, 1)) {
                double acc = 0.0;
                for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa[i];
                (*gs)[0] -= acc / (sv * sv);
            }
        },
        "div_scalar_tensor");
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a[i]);
    return Tensor::from_op(
        a.shape(), std::move(out), {a},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    (*ga)[i] += self.grad[i] * self.data[i];
        },
        "exp");
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (a[i] <= 0.0) throw std::domain_error("log: non-positive input");
        out[i] = std::log(a[i]);
    }
    return Tensor::from_op(
        a.shape(), std::move(out), {a},
        [](const TensorNode& self) {
            const auto& pa = self.parents[0]->data;
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] / pa[i];
        },
        "log");
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
    return Tensor::from_op(
        a.shape(), std::move(out), {a},
        [](const TensorNode& self) {
            const auto& pa = self.parents[0]->data;
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    if (pa[i] > 0.0) (*ga)[i] += self.grad[i];
        },
        "relu");
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Split by sign to avoid overflow in exp.
        out[i] = a[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-a[i]))
                             : std::exp(a[i]) / (1.0 + std::exp(a[i]));
    }
    return Tensor::from_op(
        a.shape(), std::move(out), {a},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    (*ga)[i] += self.grad[i] * self.data[i] * (1.0 - self.data[i]);
        },
        "sigmoid");
}

// ---------------------------------------------------------------------------
// reductions / structure

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
    return Tensor::from_op(
        {1}, {acc}, {a},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (double& g : *ga) g += self.grad[0];
        },
        "sum");
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
    acc /= static_cast<double>(a.size());
    return Tensor::from_op(
        {1}, {acc}, {a},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0)) {
                const double s = self.grad[0] / static_cast<double>(ga->size());
                for (double& g : *ga) g += s;
            }
        },
        "mean");
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    }
    return Tensor::from_op(
        std::move(shape), a.data(), {a},
        [](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
        },
        "reshape");
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) {
        throw std::invalid_argument("transpose: expected 2-D tensor, got " + shape_str(a.shape()));
    }
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return Tensor::from_op(
        {n, m}, std::move(out), {a},
        [m, n](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += self.grad[j * m + i];
        },
        "transpose");
}

namespace {

// out (m x n) += a (m x k) * b (k x n); ikj order keeps the inner loop contiguous.
void matmul_acc(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
                std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* orow = out + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out (m x k) += g (m x n) * b^T (n x k), reading b as (k x n).
void matmul_acc_bt(const double* g, const double* b, double* out, std::size_t m, std::size_t k,
                   std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        double* orow = out + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            orow[p] += acc;
        }
    }
}

// out (k x n) += a^T (k x m) * g (m x n), reading a as (m x k).
void matmul_acc_at(const double* a, const double* g, double* out, std::size_t m, std::size_t k,
                   std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* orow = out + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2) {
        throw std::invalid_argument("matmul: expected 2-D tensors, got " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    matmul_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
    return Tensor::from_op(
        {m, n}, std::move(out), {a, b},
        [m, k, n](const TensorNode& self) {
            const auto& pa = self.parents[0]->data;
            const auto& pb = self.parents[1]->data;
            if (auto* ga = grad_sink(self, 0))
                matmul_acc_bt(self.grad.data(), pb.data(), ga->data(), m, k, n);
            if (auto* gb = grad_sink(self, 1))
                matmul_acc_at(pa.data(), self.grad.data(), gb->data(), m, k, n);
        },
        "matmul");
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    if (a.shape().size() != 2 || bias.shape().size() != 1) {
        throw std::invalid_argument("add_rowvec: expected 2-D input and 1-D bias, got " +
                                    shape_str(a.shape()) + " and " + shape_str(bias.shape()));
    }
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    if (bias.size() != n) {
        throw std::invalid_argument("add_rowvec: bias length " + std::to_string(bias.size()) +
                                    " for row width " + std::to_string(n));
    }
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + bias[j];
    return Tensor::from_op(
        {m, n}, std::move(out), {a, bias},
        [m, n](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
            if (auto* gb = grad_sink(self, 1))
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) (*gb)[j] += self.grad[i * n + j];
        },
        "add_rowvec");
}

Tensor global_average_pool(const Tensor& a) {
    if (a.shape().size() != 3) {
        throw std::invalid_argument("global_average_pool: expected C x h x w tensor, got " +
                                    shape_str(a.shape()));
    }
    const std::size_t ch = a.shape()[0], hw = a.shape()[1] * a.shape()[2];
    if (hw == 0) throw std::invalid_argument("global_average_pool: empty spatial extent");
    std::vector<double> out(ch, 0.0);
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < hw; ++i) out[c] += a[c * hw + i];
        out[c] /= static_cast<double>(hw);
    }
    return Tensor::from_op(
        {ch}, std::move(out), {a},
        [ch, hw](const TensorNode& self) {
            if (auto* ga = grad_sink(self, 0)) {
                const double inv = 1.0 / static_cast<double>(hw);
                for (std::size_t c = 0; c < ch; ++c) {
                    const double g = self.grad[c] * inv;
                    for (std::size_t i = 0; i < hw; ++i) (*ga)[c * hw + i] += g;
                }
            }
        },
        "global_average_pool");
}

Tensor detach(const Tensor& a) {
    if (!a.defined()) throw std::invalid_argument("detach: undefined input");
    return Tensor::from_data(a.shape(), a.data(), false);
}

// ---------------------------------------------------------------------------
// matching-specific primitives

Tensor l2_normalize(const Tensor& a, double eps) {
    if (eps <= 0.0) throw std::domain_error("l2_normalize: eps must be positive");
    const auto& shape = a.shape();
    std::size_t rows, cols;
    if (shape.size() == 1) {
        rows = 1;
        cols = shape[0];
    } else if (shape.size() == 2) {
        rows = shape[0];
        cols = shape[1];
    } else {
        throw std::invalid_argument("l2_normalize: expected 1-D or 2-D tensor, got " +
                                    shape_str(shape));
    }
    std::vector<double> out(a.size());
    std::vector<double> denom(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sq += a[i * cols + j] * a[i * cols + j];
        const double norm = std::sqrt(sq);
        denom[i] = norm > eps ? norm : eps;
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = a[i * cols + j] / denom[i];
    }
    return Tensor::from_op(
        shape, std::move(out), {a},
        [rows, cols, eps, denom = std::move(denom)](const TensorNode& self) {
            auto* ga = grad_sink(self, 0);
            if (!ga) return;
            const auto& x = self.parents[0]->data;
            for (std::size_t i = 0; i < rows; ++i) {
                const double n = denom[i];
                if (n <= eps) {
                    // Below the floor the map is x/eps, a plain rescale.
                    for (std::size_t j = 0; j < cols; ++j)
                        (*ga)[i * cols + j] += self.grad[i * cols + j] / eps;
                    continue;
                }
                double xg = 0.0;
                for (std::size_t j = 0; j < cols; ++j)
                    xg += x[i * cols + j] * self.grad[i * cols + j];
                const double n3 = n * n * n;
                for (std::size_t j = 0; j < cols; ++j)
                    (*ga)[i * cols + j] +=
                        self.grad[i * cols + j] / n - x[i * cols + j] * xg / n3;
            }
        },
        "l2_normalize");
}

Tensor softmax(const Tensor& z, const Tensor& beta) {
    check_scalar(beta, "softmax");
    const double b = beta[0];
    if (b <= 0.0) throw std::domain_error("softmax: beta must be positive");
    if (z.size() == 0) throw std::invalid_argument("softmax: empty input");
    double zmax = z[0];
    for (std::size_t i = 1; i < z.size(); ++i) zmax = std::max(zmax, z[i]);
    std::vector<double> u(z.size());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        u[i] = (z[i] - zmax) / b;
        p[i] = std::exp(u[i]);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return Tensor::from_op(
        z.shape(), std::move(p), {z, beta},
        [u = std::move(u)](const TensorNode& self) {
            const double b = self.parents[1]->data[0];
            const auto& p = self.data;
            const auto& g = self.grad;
            double gdot = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) gdot += g[i] * p[i];
            if (auto* gz = grad_sink(self, 0))
                for (std::size_t i = 0; i < p.size(); ++i)
                    (*gz)[i] += p[i] * (g[i] - gdot) / b;
            if (auto* gb = grad_sink(self, 1)) {
                // d p_i / d beta = p_i * (u_bar - u_i) / beta with u = (z - max z)/beta.
                double ubar = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) ubar += p[i] * u[i];
                double acc = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) acc += g[i] * p[i] * (ubar - u[i]);
                (*gb)[0] += acc / b;
            }
        },
        "softmax");
}

Tensor softmax(const Tensor& z, double beta) { return softmax(z, Tensor::scalar(beta)); }

Tensor bilinear_sample(const Tensor& grid, double row, double col) {
    const auto& shape = grid.shape();
    std::size_t h, w, depth;
    if (shape.size() == 2) {
        h = shape[0];
        w = shape[1];
        depth = 1;
    } else if (shape.size() == 3) {
        h = shape[0];
        w = shape[1];
        depth = shape[2];
    } else {
        throw std::invalid_argument("bilinear_sample: expected 2-D or 3-D grid, got " +
                                    shape_str(shape));
    }
    if (h == 0 || w == 0) throw std::invalid_argument("bilinear_sample: empty grid");
    if (!std::isfinite(row) || !std::isfinite(col)) {
        throw std::domain_error("bilinear_sample: non-finite coordinates");
    }
    if (row < 0.0 || row > static_cast<double>(h - 1) || col < 0.0 ||
        col > static_cast<double>(w - 1)) {
        std::ostringstream msg;
        msg << "bilinear_sample: point (" << row << ", " << col << ") outside grid " << h << " x "
            << w;
        throw std::out_of_range(msg.str());
    }
    std::size_t r0 = static_cast<std::size_t>(std::floor(row));
    std::size_t c0 = static_cast<std::size_t>(std::floor(col));
    if (r0 >= h - 1 && h > 1) r0 = h - 2;
    if (c0 >= w - 1 && w > 1) c0 = w - 2;
    const std::size_t r1 = h > 1 ? r0 + 1 : 0;
    const std::size_t c1 = w > 1 ? c0 + 1 : 0;
    const double fr = row - static_cast<double>(r0);
    const double fc = col - static_cast<double>(c0);
    const double w00 = (1.0 - fr) * (1.0 - fc);
    const double w01 = (1.0 - fr) * fc;
    const double w10 = fr * (1.0 - fc);
    const double w11 = fr * fc;
    std::vector<double> out(depth);
    for (std::size_t d = 0; d < depth; ++d) {
        out[d] = w00 * grid[(r0 * w + c0) * depth + d] + w01 * grid[(r0 * w + c1) * depth + d] +
                 w10 * grid[(r1 * w + c0) * depth + d] + w11 * grid[(r1 * w + c1) * depth + d];
    }
    Shape out_shape = depth == 1 ? Shape{1} : Shape{depth};
    return Tensor::from_op(
        std::move(out_shape), std::move(out), {grid},
        [w, depth, r0, c0, r1, c1, w00, w01, w10, w11](const TensorNode& self) {
            if (auto* gg = grad_sink(self, 0)) {
                for (std::size_t d = 0; d < depth; ++d) {
                    const double g = self.grad[d];
                    (*gg)[(r0 * w + c0) * depth + d] += w00 * g;
                    (*gg)[(r0 * w + c1) * depth + d] += w01 * g;
                    (*gg)[(r1 * w + c0) * depth + d] += w10 * g;
                    (*gg)[(r1 * w + c1) * depth + d] += w11 * g;
                }
            }
        },
        "bilinear_sample");
}

Tensor patchify(const Tensor& image, std::size_t ratio) {
    if (image.shape().size() != 3) {
        throw std::invalid_argument("patchify: expected ch x H x W image, got " +
                                    shape_str(image.shape()));
    }
    if (ratio == 0) throw std::invalid_argument("patchify: ratio must be positive");
    const std::size_t ch = image.shape()[0], H = image.shape()[1], W = image.shape()[2];
    if (H % ratio != 0 || W % ratio != 0) {
        throw std::invalid_argument("patchify: image " + shape_str(image.shape()) +
                                    " not divisible by ratio " + std::to_string(ratio));
    }
    const std::size_t ph = H / ratio, pw = W / ratio;
    const std::size_t cols = ch * ratio * ratio;
    std::vector<double> out(ph * pw * cols);
    for (std::size_t pi = 0; pi < ph; ++pi)
        for (std::size_t pj = 0; pj < pw; ++pj) {
            double* row = out.data() + (pi * pw + pj) * cols;
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t dy = 0; dy < ratio; ++dy)
                    for (std::size_t dx = 0; dx < ratio; ++dx)
                        row[(c * ratio + dy) * ratio + dx] =
                            image[(c * H + pi * ratio + dy) * W + pj * ratio + dx];
        }
    return Tensor::from_op(
        {ph * pw, cols}, std::move(out), {image},
        [ch, H, W, ratio, ph, pw, cols](const TensorNode& self) {
            if (auto* gi = grad_sink(self, 0)) {
                for (std::size_t pi = 0; pi < ph; ++pi)
                    for (std::size_t pj = 0; pj < pw; ++pj) {
                        const double* row = self.grad.data() + (pi * pw + pj) * cols;
                        for (std::size_t c = 0; c < ch; ++c)
                            for (std::size_t dy = 0; dy < ratio; ++dy)
                                for (std::size_t dx = 0; dx < ratio; ++dx)
                                    (*gi)[(c * H + pi * ratio + dy) * W + pj * ratio + dx] +=
                                        row[(c * ratio + dy) * ratio + dx];
                    }
            }
        },
        "patchify");
}

}  // namespace simsc
