#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "simsc/rng.hpp"
#include "simsc/tensor.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace simsc;
using simsc::testing::gradcheck;

namespace {

// Uniform values in [lo, hi] kept clear of ReLU kinks and exact zeros.
Tensor random_leaf(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) {
        do {
            v = rng.uniform(lo, hi);
        } while (std::abs(v) < 1e-3);
    }
    return Tensor::from_data(std::move(shape), std::move(values), true);
}

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("construction and basic accessors") {
    Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.shape() == Shape{2, 3});
    CHECK(t.size() == 6);
    CHECK(t[4] == 5.0);
    CHECK_FALSE(t.requires_grad());
    CHECK_THROWS_AS(Tensor::from_data({2}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::from_data({1}, {std::nan("")}), std::runtime_error);
    CHECK(Tensor::scalar(4.25).value() == 4.25);
    CHECK_THROWS_AS(Tensor::from_data({2}, {1, 2}).value(), std::invalid_argument);
}

TEST_CASE("matmul identity and unit dot product") {
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(eye, a).data() == std::vector<double>{1, 2, 3, 4});

    Tensor row = Tensor::from_data({1, 2}, {1, 0});
    Tensor col = Tensor::from_data({2, 1}, {1, 0});
    CHECK(matmul(row, col).data() == std::vector<double>{1});

    CHECK_THROWS_AS(matmul(row, row), std::invalid_argument);
}

TEST_CASE("matmul gradients vs finite differences") {
    Rng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_leaf(rng, {3, 4});
        Tensor b = random_leaf(rng, {4, 2});
        auto report = gradcheck([&] { return sum(matmul(a, b)); }, {a, b});
        CHECK(report.max_rel_err < 1e-6);
    }
}

TEST_CASE("softmax values") {
    Tensor uniform = softmax(Tensor::from_data({3}, {0, 0, 0}), 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(uniform[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Tensor p = softmax(Tensor::from_data({3}, {1, 2, 3}), 1.0);
    CHECK(p[0] == doctest::Approx(0.090031).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(0.244728).epsilon(1e-5));
    CHECK(p[2] == doctest::Approx(0.665241).epsilon(1e-5));

    Tensor sharp = softmax(Tensor::from_data({2}, {0.5, 0.9}), 0.02);
    const double expected = std::exp(-20.0) / (1.0 + std::exp(-20.0));
    CHECK(sharp[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(sharp[1] == doctest::Approx(1.0 - expected).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(Tensor::from_data({2}, {0, 1}), 0.0), std::domain_error);
    CHECK_THROWS_AS(softmax(Tensor::from_data({2}, {0, 1}), -0.5), std::domain_error);
}

TEST_CASE("softmax sums to one and stays stable at small beta") {
    Rng rng(202);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor z = random_leaf(rng, {17});
        for (double beta : {1.0, 0.05, 1e-3}) {
            Tensor p = softmax(z, beta);
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) total += p[i];
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("softmax entropy non-decreasing in beta; argmax invariant") {
    Rng rng(303);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor z = random_leaf(rng, {12});
        const std::vector<double> betas = {0.02, 0.1, 0.5, 1.0, 3.0};
        double prev_entropy = -1.0;
        const auto argmax_of = [](const std::vector<double>& v) {
            return std::distance(v.begin(), std::max_element(v.begin(), v.end()));
        };
        const auto base_mode = argmax_of(z.data());
        for (double beta : betas) {
            const auto p = softmax(z, beta).data();
            CHECK(entropy(p) >= prev_entropy - 1e-12);
            prev_entropy = entropy(p);
            CHECK(argmax_of(p) == base_mode);
        }
    }
}

TEST_CASE("softmax matches brute-force oracle") {
    Rng rng(404);
    for (int trial = 0; trial < 25; ++trial) {
        Tensor z = random_leaf(rng, {64});
        for (double beta : {1.0, 0.1, 0.02}) {
            const auto got = softmax(z, beta).data();
            const auto want = testing::softmax_brute(z.data(), beta);
            for (std::size_t i = 0; i < got.size(); ++i)
                CHECK(std::abs(got[i] - want[i]) < 1e-12);
        }
    }
}

TEST_CASE("softmax gradients w.r.t. z and beta") {
    Rng rng(505);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor z = random_leaf(rng, {9});
        Tensor beta = Tensor::from_data({1}, {rng.uniform(0.05, 1.5)}, true);
        Tensor weights = random_leaf(rng, {9});
        weights = detach(weights);
        auto report = gradcheck([&] { return sum(mul(softmax(z, beta), weights)); }, {z, beta});
        // fd truncation grows as 1/beta^3; the contract tolerance is 1e-4.
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("l2_normalize values") {
    Tensor v = l2_normalize(Tensor::from_data({2}, {3, 4}));
    CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));

    Tensor unit = l2_normalize(Tensor::from_data({3}, {0, 1, 0}));
    CHECK(unit.data() == std::vector<double>{0, 1, 0});

    Tensor zero = l2_normalize(Tensor::from_data({3}, {0, 0, 0}), 1e-8);
    CHECK(zero.data() == std::vector<double>{0, 0, 0});
}

TEST_CASE("l2_normalize row-wise unit norms") {
    Rng rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor m = random_leaf(rng, {5, 7});
        Tensor n = l2_normalize(m);
        for (std::size_t i = 0; i < 5; ++i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < 7; ++j) sq += n[i * 7 + j] * n[i * 7 + j];
            CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("l2_normalize gradients") {
    Rng rng(707);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor m = random_leaf(rng, {3, 5});
        Tensor weights = detach(random_leaf(rng, {3, 5}));
        auto report = gradcheck([&] { return sum(mul(l2_normalize(m), weights)); }, {m});
        CHECK(report.max_rel_err < 1e-5);
    }
}

TEST_CASE("bilinear_sample values") {
    Tensor grid = Tensor::from_data({2, 2}, {0, 1, 2, 3});
    CHECK(bilinear_sample(grid, 0, 0).value() == 0.0);
    CHECK(bilinear_sample(grid, 1, 1).value() == 3.0);
    CHECK(bilinear_sample(grid, 0.5, 0.5).value() == doctest::Approx(1.5).epsilon(1e-12));

    Tensor grid2 = Tensor::from_data({2, 2}, {0, 2, 4, 6});
    CHECK(bilinear_sample(grid2, 0.25, 0.75).value() == doctest::Approx(2.5).epsilon(1e-12));

    CHECK_THROWS_AS(bilinear_sample(grid, -0.01, 0), std::out_of_range);
    CHECK_THROWS_AS(bilinear_sample(grid, 0, 1.01), std::out_of_range);
}

TEST_CASE("bilinear_sample vector grids and integer exactness") {
    Rng rng(808);
    Tensor grid = random_leaf(rng, {4, 5, 3});
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 5; ++c) {
            Tensor s = bilinear_sample(grid, static_cast<double>(r), static_cast<double>(c));
            CHECK(s.shape() == Shape{3});
            for (std::size_t d = 0; d < 3; ++d) CHECK(s[d] == grid[(r * 5 + c) * 3 + d]);
        }
}

TEST_CASE("bilinear_sample gradients") {
    Rng rng(909);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor grid = random_leaf(rng, {4, 4});
        const double row = rng.uniform(0.05, 2.95);
        const double col = rng.uniform(0.05, 2.95);
        auto report = gradcheck([&] { return bilinear_sample(grid, row, col); }, {grid});
        CHECK(report.max_rel_err < 1e-5);
    }
}

TEST_CASE("element-wise and reduction ops forward values") {
    Tensor a = Tensor::from_data({3}, {1, -2, 3});
    Tensor b = Tensor::from_data({3}, {4, 5, -6});
    CHECK(add(a, b).data() == std::vector<double>{5, 3, -3});
    CHECK(sub(a, b).data() == std::vector<double>{-3, -7, 9});
    CHECK(mul(a, b).data() == std::vector<double>{4, -10, -18});
    CHECK(add_scalar(a, 1.5).data() == std::vector<double>{2.5, -0.5, 4.5});
    CHECK(mul_scalar(a, -2).data() == std::vector<double>{-2, 4, -6});
    CHECK(div_scalar(a, 2).data() == std::vector<double>{0.5, -1, 1.5});
    CHECK(relu(a).data() == std::vector<double>{1, 0, 3});
    CHECK(sigmoid(Tensor::scalar(0.0)).value() == 0.5);
    CHECK(sum(a).value() == 2.0);
    CHECK(mean(a).value() == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(transpose(Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6})).data() ==
          std::vector<double>{1, 4, 2, 5, 3, 6});
    CHECK_THROWS_AS(log(Tensor::from_data({2}, {1, -1})), std::domain_error);
    CHECK_THROWS_AS(log(Tensor::from_data({1}, {0})), std::domain_error);
    CHECK_THROWS_AS(div_scalar(a, 0.0), std::domain_error);
    CHECK_THROWS_AS(add(a, Tensor::from_data({2}, {1, 2})), std::invalid_argument);
}

TEST_CASE("global_average_pool") {
    Tensor constant = Tensor::full({3, 2, 4}, 2.5);
    const auto pooled = global_average_pool(constant).data();
    CHECK(pooled == std::vector<double>{2.5, 2.5, 2.5});

    Tensor map = Tensor::from_data({2, 1, 2}, {1, 3, 10, 20});
    CHECK(global_average_pool(map).data() == std::vector<double>{2, 15});
}

TEST_CASE("gradients of every elementwise/reduction op") {
    Rng rng(1111);
    const auto check = [&](const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
        auto report = gradcheck(f, std::move(inputs));
        CHECK(report.max_rel_err < 1e-5);
    };
    for (int trial = 0; trial < 6; ++trial) {
        Tensor a = random_leaf(rng, {7});
        Tensor b = random_leaf(rng, {7});
        Tensor pos = random_leaf(rng, {7}, 0.2, 3.0);
        Tensor s = random_leaf(rng, {1}, 0.3, 2.0);
        Tensor m = random_leaf(rng, {4, 3});
        Tensor bias = random_leaf(rng, {3});
        Tensor img = random_leaf(rng, {2, 4, 4});
        check([&] { return sum(mul(add(a, b), sub(a, b))); }, {a, b});
        check([&] { return sum(exp(mul_scalar(a, 0.5))); }, {a});
        check([&] { return sum(log(pos)); }, {pos});
        check([&] { return sum(relu(a)); }, {a});
        check([&] { return sum(sigmoid(a)); }, {a});
        check([&] { return mean(mul(a, a)); }, {a});
        check([&] { return sum(mul_scalar_tensor(a, s)); }, {a, s});
        check([&] { return sum(div_scalar_tensor(a, s)); }, {a, s});
        check([&] { return sum(mul(transpose(m), transpose(m))); }, {m});
        check([&] { return sum(reshape(mul(m, m), {12})); }, {m});
        check([&] { return sum(add_rowvec(m, bias)); }, {m, bias});
        check([&] { return sum(mul(global_average_pool(img), global_average_pool(img))); }, {img});
        check([&] { return sum(mul(patchify(img, 2), patchify(img, 2))); }, {img});
    }
}

TEST_CASE("patchify layout") {
    // 1 x 4 x 4 image, ratio 2: patch rows scan patches row-major, columns scan
    // (channel, dy, dx).
    std::vector<double> img(16);
    for (std::size_t i = 0; i < 16; ++i) img[i] = static_cast<double>(i);
    Tensor t = patchify(Tensor::from_data({1, 4, 4}, img), 2);
    CHECK(t.shape() == Shape{4, 4});
    CHECK(t.data() == std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15});
    CHECK_THROWS_AS(patchify(Tensor::from_data({1, 4, 4}, img), 3), std::invalid_argument);
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(1212);
    Tensor x = random_leaf(rng, {5});
    Tensor y = random_leaf(rng, {5});
    x.zero_grad();
    y.zero_grad();
    Tensor loss = sum(mul(detach(x), y));
    loss.backward();
    CHECK_FALSE(x.has_grad());
    CHECK(y.has_grad());

    // x flowing only through detach into the loss: grad(x) stays absent even
    // when x also exists elsewhere in the program.
    Tensor z = add(detach(mul(x, x)), y);
    sum(z).backward();
    CHECK_FALSE(x.has_grad());
}

TEST_CASE("backward leaves forward data unchanged") {
    Rng rng(1313);
    Tensor a = random_leaf(rng, {4, 4});
    Tensor b = random_leaf(rng, {4, 4});
    Tensor mid = matmul(a, b);
    Tensor sm = softmax(reshape(mid, {16}), 0.5);
    Tensor loss = sum(mul(sm, sm));
    const auto mid_before = mid.data();
    const auto sm_before = sm.data();
    const auto a_before = a.data();
    loss.backward();
    CHECK(mid.data() == mid_before);
    CHECK(sm.data() == sm_before);
    CHECK(a.data() == a_before);
}

TEST_CASE("gradient accumulation sums until caller zeroes") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    sum(mul(x, x)).backward();
    CHECK(x.grad() == std::vector<double>{2, 4});
    sum(mul(x, x)).backward();
    CHECK(x.grad() == std::vector<double>{4, 8});
    x.zero_grad();
    sum(mul(x, x)).backward();
    CHECK(x.grad() == std::vector<double>{2, 4});
}

TEST_CASE("backward requires scalar root; non-finite forward raises") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    CHECK_THROWS_AS(mul(x, x).backward(), std::invalid_argument);
    Tensor big = Tensor::from_data({1}, {1000.0}, true);
    CHECK_THROWS_AS(exp(big), std::runtime_error);
}

TEST_CASE("diamond graph accumulates through both paths") {
    Tensor x = Tensor::from_data({1}, {3.0}, true);
    Tensor y = mul(x, x);
    Tensor loss = add(y, y);  // d/dx (2x^2) = 4x = 12
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_SUITE_END();
