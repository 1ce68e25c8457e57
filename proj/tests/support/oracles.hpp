#pragma once

// Independent brute-force reimplementations (explicit loops, no shared code
// with the library) used as equivalence oracles.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace simsc::testing {

inline std::vector<double> softmax_brute(const std::vector<double>& z, double beta) {
    double zmax = z[0];
    for (std::size_t i = 1; i < z.size(); ++i)
        if (z[i] > zmax) zmax = z[i];
    std::vector<double> out(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp((z[i] - zmax) / beta);
        total += out[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= total;
    return out;
}

inline double cross_entropy_brute(const std::vector<double>& scores,
                                  const std::vector<double>& gt) {
    const std::vector<double> p = softmax_brute(scores, 1.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] > 0.0) loss -= gt[i] * std::log(p[i]);
    }
    return loss;
}

// Smoothed ground-truth distribution: Gaussian with std floor(n_k/2) sampled
// on the n_s x n_s window centered at the integer cell nearest gt, clipped at
// the borders, normalized to sum 1.
inline std::vector<double> gt_distribution_brute(double gt_row, double gt_col, std::size_t h,
                                                 std::size_t w, int n_s, int n_k) {
    const int cr = static_cast<int>(std::floor(gt_row + 0.5));
    const int cc = static_cast<int>(std::floor(gt_col + 0.5));
    const int half = n_s / 2;
    const double std_dev = static_cast<double>(n_k / 2);
    std::vector<double> out(h * w, 0.0);
    double total = 0.0;
    for (int u = cr - half; u <= cr + half; ++u) {
        for (int v = cc - half; v <= cc + half; ++v) {
            if (u < 0 || v < 0 || u >= static_cast<int>(h) || v >= static_cast<int>(w)) continue;
            const double du = static_cast<double>(u) - gt_row;
            const double dv = static_cast<double>(v) - gt_col;
            const double g = std::exp(-(du * du + dv * dv) / (2.0 * std_dev * std_dev));
            out[static_cast<std::size_t>(u) * w + static_cast<std::size_t>(v)] = g;
            total += g;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= total;
    return out;
}

// Kernel soft-argmax: Gaussian mask at the (row-major tie-break) argmax,
// element-wise multiply, softmax at beta_eval, coordinate expectation.
inline std::pair<double, double> kernel_soft_argmax_brute(const std::vector<double>& m,
                                                          std::size_t h, std::size_t w,
                                                          double sigma, double beta_eval) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < h * w; ++i)
        if (m[i] > m[best]) best = i;
    const double br = static_cast<double>(best / w);
    const double bc = static_cast<double>(best % w);
    std::vector<double> masked(h * w);
    for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t l = 0; l < w; ++l) {
            const double dr = static_cast<double>(k) - br;
            const double dc = static_cast<double>(l) - bc;
            const double g = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
            masked[k * w + l] = g * m[k * w + l];
        }
    }
    const std::vector<double> p = softmax_brute(masked, beta_eval);
    double er = 0.0, ec = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t l = 0; l < w; ++l) {
            er += p[k * w + l] * static_cast<double>(k);
            ec += p[k * w + l] * static_cast<double>(l);
        }
    }
    return {er, ec};
}

inline double pck_brute(const std::vector<std::pair<double, double>>& preds,
                        const std::vector<std::pair<double, double>>& gts, double alpha,
                        double theta) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double dr = preds[i].first - gts[i].first;
        const double dc = preds[i].second - gts[i].second;
        if (std::sqrt(dr * dr + dc * dc) <= alpha * theta) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace simsc::testing
