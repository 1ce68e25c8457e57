#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "simsc/objective.hpp"
#include "simsc/rng.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace simsc;

TEST_SUITE_BEGIN("objective");

TEST_CASE("gt distribution at an integer cell") {
    GtDistribution gt = make_gt_distribution({4.0, 4.0}, 8, 8, 3, 5);
    const double s = 1.0 + 2.0 * std::exp(-1.0 / 8.0);
    const double center = 1.0 / (s * s);
    const double edge = std::exp(-1.0 / 8.0) / (s * s);
    const double corner = std::exp(-2.0 / 8.0) / (s * s);
    CHECK(center == doctest::Approx(0.13080).epsilon(1e-4));
    CHECK(gt.data[4 * 8 + 4] == doctest::Approx(center).epsilon(1e-12));
    CHECK(gt.data[3 * 8 + 4] == doctest::Approx(edge).epsilon(1e-12));
    CHECK(gt.data[4 * 8 + 5] == doctest::Approx(edge).epsilon(1e-12));
    CHECK(gt.data[3 * 8 + 3] == doctest::Approx(corner).epsilon(1e-12));
    CHECK(edge == doctest::Approx(0.11543).epsilon(1e-4));
    CHECK(corner == doctest::Approx(0.10187).epsilon(1e-4));

    double total = 0;
    std::size_t support = 0;
    for (double p : gt.data) {
        total += p;
        if (p > 0) ++support;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
    CHECK(support == 9);
}

TEST_CASE("gt distribution clips at borders and renormalizes") {
    GtDistribution corner = make_gt_distribution({0.0, 0.0}, 6, 6, 3, 5);
    double total = 0;
    std::size_t support = 0;
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t v = 0; v < 6; ++v) {
            const double p = corner.data[u * 6 + v];
            total += p;
            if (p > 0) {
                ++support;
                CHECK(u <= 1);
                CHECK(v <= 1);
            }
        }
    CHECK(support == 4);
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("n_s=1 gives a one-hot at the nearest cell") {
    GtDistribution gt = make_gt_distribution({2.4, 3.6}, 6, 6, 1, 3);
    for (std::size_t i = 0; i < 36; ++i) {
        CHECK(gt.data[i] == (i == 2 * 6 + 4 ? 1.0 : 0.0));
    }
}

TEST_CASE("gt distribution matches brute-force oracle and stays normalized") {
    Rng rng(91);
    for (int trial = 0; trial < 40; ++trial) {
        const double r = rng.uniform(0.0, 7.0), c = rng.uniform(0.0, 7.0);
        GtDistribution gt = make_gt_distribution({r, c}, 8, 8, 3, 5);
        const auto want = testing::gt_distribution_brute(r, c, 8, 8, 3, 5);
        double total = 0;
        for (std::size_t i = 0; i < 64; ++i) {
            CHECK(std::abs(gt.data[i] - want[i]) < 1e-12);
            total += gt.data[i];
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
    }
}

TEST_CASE("gt distribution is translation covariant") {
    GtDistribution base = make_gt_distribution({3.3, 2.8}, 10, 10, 3, 5);
    GtDistribution shifted = make_gt_distribution({5.3, 6.8}, 10, 10, 3, 5);
    for (int du = -2; du <= 2; ++du)
        for (int dv = -2; dv <= 2; ++dv) {
            const std::size_t u0 = static_cast<std::size_t>(3 + du);
            const std::size_t v0 = static_cast<std::size_t>(3 + dv);
            const std::size_t u1 = static_cast<std::size_t>(5 + du);
            const std::size_t v1 = static_cast<std::size_t>(7 + dv);
            CHECK(base.data[u0 * 10 + v0] == shifted.data[u1 * 10 + v1]);
        }
}

TEST_CASE("gt validation") {
    CHECK_THROWS_AS(make_gt_distribution({-0.1, 2}, 8, 8, 3, 5), std::out_of_range);
    CHECK_THROWS_AS(make_gt_distribution({2, 7.2}, 8, 8, 3, 5), std::out_of_range);
    CHECK_THROWS_AS(make_gt_distribution({2, 2}, 8, 8, 2, 5), std::domain_error);
    CHECK_THROWS_AS(make_gt_distribution({2, 2}, 8, 8, 3, 3), std::domain_error);
    CHECK_THROWS_AS(make_gt_distribution({2, 2}, 8, 8, 5, 3), std::domain_error);
}

TEST_CASE("cross entropy against uniform and matching predictions") {
    // Uniform prediction, one-hot target: loss = log N.
    GtDistribution onehot = make_gt_distribution({1.0, 1.0}, 4, 4, 1, 3);
    Tensor zeros = Tensor::zeros({4, 4});
    CHECK(cross_entropy(zeros, onehot).value() == doctest::Approx(std::log(16.0)).epsilon(1e-12));

    // Prediction softmax equal to gt: loss = entropy(gt), the CE lower bound.
    GtDistribution gt = make_gt_distribution({1.7, 2.2}, 4, 4, 3, 5);
    std::vector<double> scores(16, -2000.0);
    double entropy = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
        if (gt.data[i] > 0) {
            scores[i] = std::log(gt.data[i]);
            entropy -= gt.data[i] * std::log(gt.data[i]);
        }
    }
    const double loss = cross_entropy(Tensor::from_data({4, 4}, scores), gt).value();
    CHECK(loss == doctest::Approx(entropy).epsilon(1e-12));
}

TEST_CASE("cross entropy matches brute-force oracle and lower bound") {
    Rng rng(92);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> scores(16);
        for (auto& v : scores) v = rng.uniform(-3, 3);
        GtDistribution gt =
            make_gt_distribution({rng.uniform(0, 3), rng.uniform(0, 3)}, 4, 4, 3, 5);
        const double got = cross_entropy(Tensor::from_data({4, 4}, scores), gt).value();
        const double want = testing::cross_entropy_brute(scores, gt.data);
        CHECK(std::abs(got - want) < 1e-12);

        double entropy = 0.0;
        for (double p : gt.data)
            if (p > 0) entropy -= p * std::log(p);
        CHECK(got >= entropy - 1e-12);
    }
}

TEST_CASE("cross entropy gradient") {
    Rng rng(93);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> scores(16);
        for (auto& v : scores) v = rng.uniform(-2, 2);
        Tensor t = Tensor::from_data({4, 4}, std::move(scores), true);
        GtDistribution gt =
            make_gt_distribution({rng.uniform(0, 3), rng.uniform(0, 3)}, 4, 4, 3, 5);
        auto report = testing::gradcheck([&] { return cross_entropy(t, gt); }, {t});
        CHECK(report.max_rel_err < 1e-5);
    }
}

TEST_CASE("cross entropy clamps underflowed predictions and reports them") {
    GtDistribution gt = make_gt_distribution({0.0, 0.0}, 2, 2, 1, 3);
    Tensor scores = Tensor::from_data({2, 2}, {-800.0, 0.0, 0.0, 0.0});
    CeDiagnostics diag;
    const double loss = cross_entropy(scores, gt, &diag).value();
    CHECK(diag.clamped == 1);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(-std::log(1e-300)).epsilon(1e-6));
}

TEST_CASE("temperature regularizer analytic values") {
    CHECK(temperature_regularizer(Tensor::scalar(0.1), 0.1).value() == 0.0);
    CHECK(std::abs(temperature_regularizer(Tensor::scalar(0.05), 0.1).value() - std::log(2.0)) <
          1e-12);
    CHECK(temperature_regularizer(Tensor::scalar(0.5), 0.1).value() == 0.0);
    CHECK_THROWS_AS(temperature_regularizer(Tensor::scalar(0.0), 0.1), std::domain_error);
    CHECK_THROWS_AS(temperature_regularizer(Tensor::scalar(-1.0), 0.1), std::domain_error);
    CHECK(temperature_regularizer_value(0.05, 0.1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("temperature regularizer gradient is -1/beta below threshold, 0 above") {
    Rng rng(94);
    for (int trial = 0; trial < 10; ++trial) {
        const double b = rng.uniform(0.01, 0.0999);
        Tensor beta = Tensor::from_data({1}, {b}, true);
        Tensor reg = temperature_regularizer(beta, 0.1);
        reg.backward();
        CHECK(beta.grad()[0] == doctest::Approx(-1.0 / b).epsilon(1e-12));

        Tensor above = Tensor::from_data({1}, {rng.uniform(0.11, 0.9)}, true);
        temperature_regularizer(above, 0.1).backward();
        CHECK_FALSE(above.has_grad());

        Tensor at = Tensor::from_data({1}, {0.1}, true);
        temperature_regularizer(at, 0.1).backward();
        CHECK_FALSE(at.has_grad());
    }
}

TEST_CASE("total loss arithmetic") {
    Tensor ce = Tensor::scalar(1.0);
    CHECK(total_loss(ce, Tensor::scalar(0.0), 0.2).value() == 1.0);
    CHECK(total_loss(ce, Tensor::scalar(std::log(2.0)), 0.2).value() ==
          doctest::Approx(1.138629).epsilon(1e-6));
    CHECK(total_loss(ce, Tensor::scalar(123.0), 0.0).value() == 1.0);
    CHECK_THROWS_AS(total_loss(ce, ce, -0.1), std::domain_error);
}

TEST_CASE("loss config validation") {
    LossConfig good;
    validate_loss_config(good);
    LossConfig bad = good;
    bad.gamma = -1;
    CHECK_THROWS_AS(validate_loss_config(bad), std::domain_error);
    bad = good;
    bad.beta_thres = 1.0;
    CHECK_THROWS_AS(validate_loss_config(bad), std::domain_error);
    bad = good;
    bad.n_s = 5;
    CHECK_THROWS_AS(validate_loss_config(bad), std::domain_error);
    bad = good;
    bad.n_k = 4;
    CHECK_THROWS_AS(validate_loss_config(bad), std::domain_error);
}

TEST_SUITE_END();
