#include "simsc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace simsc {

void validate_loss_config(const LossConfig& config) {
    if (config.gamma < 0.0) throw std::domain_error("loss config: gamma must be >= 0");
    if (config.beta_thres <= 0.0 || config.beta_thres >= 1.0) {
        throw std::domain_error("loss config: beta_thres must lie in (0,1)");
    }
    if (config.n_s <= 0 || config.n_k <= 0 || config.n_s % 2 == 0 || config.n_k % 2 == 0) {
        throw std::domain_error("loss config: n_s and n_k must be odd positive");
    }
    if (config.n_k <= config.n_s) throw std::domain_error("loss config: n_k must exceed n_s");
}

GtDistribution make_gt_distribution(Point gt, std::size_t h, std::size_t w, int n_s, int n_k) {
    if (n_s <= 0 || n_k <= 0 || n_s % 2 == 0 || n_k % 2 == 0 || n_k <= n_s) {
        throw std::domain_error("make_gt_distribution: need odd n_k > n_s > 0");
    }
    if (gt.row < 0.0 || gt.col < 0.0 || gt.row > static_cast<double>(h - 1) ||
        gt.col > static_cast<double>(w - 1)) {
        std::ostringstream msg;
        msg << "make_gt_distribution: gt (" << gt.row << ", " << gt.col << ") outside grid " << h
            << " x " << w;
        throw std::out_of_range(msg.str());
    }

    GtDistribution out;
    out.data.assign(h * w, 0.0);
    out.h = h;
    out.w = w;
    out.center = gt;
    out.n_s = n_s;
    out.n_k = n_k;

    const int cr = static_cast<int>(std::floor(gt.row + 0.5));
    const int cc = static_cast<int>(std::floor(gt.col + 0.5));
    const int half = n_s / 2;
    const double std_dev = static_cast<double>(n_k / 2);
    double total = 0.0;
    for (int u = cr - half; u <= cr + half; ++u) {
        if (u < 0 || u >= static_cast<int>(h)) continue;
        for (int v = cc - half; v <= cc + half; ++v) {
            if (v < 0 || v >= static_cast<int>(w)) continue;
            const double du = static_cast<double>(u) - gt.row;
            const double dv = static_cast<double>(v) - gt.col;
            const double g = std::exp(-(du * du + dv * dv) / (2.0 * std_dev * std_dev));
            out.data[static_cast<std::size_t>(u) * w + static_cast<std::size_t>(v)] = g;
            total += g;
        }
    }
    for (double& p : out.data) p /= total;
    return out;
}

Tensor cross_entropy(const Tensor& score_map, const GtDistribution& gt,
                     CeDiagnostics* diagnostics) {
    if (score_map.size() != gt.data.size()) {
        throw std::invalid_argument("cross_entropy: score map has " +
                                    std::to_string(score_map.size()) + " cells, gt has " +
                                    std::to_string(gt.data.size()));
    }
    const std::size_t n = score_map.size();
    const auto& z = score_map.data();
    double zmax = z[0];
    for (std::size_t i = 1; i < n; ++i) zmax = std::max(zmax, z[i]);
    double sum_exp = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum_exp += std::exp(z[i] - zmax);
    const double lse = std::log(sum_exp);

    constexpr double kLogClamp = -690.77552789821368;  // log(1e-300)
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (gt.data[i] <= 0.0) continue;
        double logp = (z[i] - zmax) - lse;
        if (std::exp(logp) == 0.0) {
            logp = kLogClamp;
            if (diagnostics) ++diagnostics->clamped;
        }
        loss -= gt.data[i] * logp;
    }

    return Tensor::from_op(
        {1}, {loss}, {score_map},
        [gt_data = gt.data, zmax, lse](const TensorNode& self) {
            if (auto* gz = grad_sink(self, 0)) {
                // grad wrt scores of -sum gt*log softmax(z) is p - gt.
                const auto& z = self.parents[0]->data;
                const double g = self.grad[0];
                for (std::size_t i = 0; i < z.size(); ++i) {
                    const double p = std::exp(z[i] - zmax - lse);
                    (*gz)[i] += g * (p - gt_data[i]);
                }
            }
        },
        "cross_entropy");
}

Tensor temperature_regularizer(const Tensor& beta, double beta_thres) {
    if (beta.size() != 1) {
        throw std::invalid_argument("temperature_regularizer: beta must be a scalar tensor");
    }
    const double b = beta[0];
    if (b <= 0.0) throw std::domain_error("temperature_regularizer: beta must be positive");
    if (beta_thres <= 0.0) {
        throw std::domain_error("temperature_regularizer: beta_thres must be positive");
    }
    const double value = b < beta_thres ? std::log(beta_thres) - std::log(b) : 0.0;
    return Tensor::from_op(
        {1}, {value}, {beta},
        [beta_thres](const TensorNode& self) {
            const double b = self.parents[0]->data[0];
            if (b >= beta_thres) return;  // inactive branch: subgradient 0
            if (auto* gb = grad_sink(self, 0)) (*gb)[0] -= self.grad[0] / b;
        },
        "temperature_regularizer");
}

double temperature_regularizer_value(double beta, double beta_thres) {
    if (beta <= 0.0) throw std::domain_error("temperature_regularizer: beta must be positive");
    return beta < beta_thres ? std::log(beta_thres) - std::log(beta) : 0.0;
}

Tensor total_loss(const Tensor& ce, const Tensor& reg, double gamma) {
    if (gamma < 0.0) throw std::domain_error("total_loss: gamma must be >= 0");
    return add(ce, mul_scalar(reg, gamma));
}

}  // namespace simsc
