#include <doctest.h>

#include <random>
#include <vector>

#include "codl/kernels.hpp"

using namespace codl;

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = (double)(rng() >> 11) * 0x1.0p-52 - 1.0;
    return v;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-300});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
    }
    return worst;
}

} // namespace

TEST_CASE("matmul kernel matches serial reference across sizes") {
    // Includes shapes past the parallel grain so the OpenMP path runs.
    const int shapes[][3] = {{1, 1, 1}, {3, 4, 5}, {50, 50, 1}, {64, 50, 1}, {96, 96, 96}};
    for (auto [m, k, n] : shapes) {
        auto a = random_vec((size_t)m * k, 1000 + m);
        auto b = random_vec((size_t)k * n, 2000 + n);
        std::vector<double> got((size_t)m * n), want((size_t)m * n);
        kern::matmul(a.data(), b.data(), got.data(), m, k, n);
        ref::matmul(a.data(), b.data(), want.data(), m, k, n);
        CHECK(max_rel_err(got, want) < 1e-12);
    }
}

TEST_CASE("matmul hand values") {
    // [[1,2],[3,4]] x [[5],[6]] = [[17],[39]], checked against the serial
    // oracle and frozen.
    const std::vector<double> a = {1, 2, 3, 4};
    const std::vector<double> b = {5, 6};
    std::vector<double> got(2), want(2);
    kern::matmul(a.data(), b.data(), got.data(), 2, 2, 1);
    ref::matmul(a.data(), b.data(), want.data(), 2, 2, 1);
    CHECK(got[0] == 17.0);
    CHECK(got[1] == 39.0);
    CHECK(want[0] == 17.0);
    CHECK(want[1] == 39.0);
}

TEST_CASE("elementwise kernels match serial reference") {
    for (int n : {7, 1 << 16}) {
        auto a = random_vec((size_t)n, 31 + n);
        std::vector<double> got(n), want(n);

        kern::tanh_map(a.data(), got.data(), n);
        ref::tanh_map(a.data(), want.data(), n);
        CHECK(max_rel_err(got, want) < 1e-14);

        // expm1 vs exp(x)-1: the production path is the more accurate one
        kern::elu_map(a.data(), got.data(), n);
        ref::elu_map(a.data(), want.data(), n);
        CHECK(max_rel_err(got, want) < 1e-12);

        kern::relu_pos_map(a.data(), got.data(), n);
        ref::relu_pos_map(a.data(), want.data(), n);
        CHECK(max_rel_err(got, want) == 0.0);

        kern::abs_map(a.data(), got.data(), n);
        ref::abs_map(a.data(), want.data(), n);
        CHECK(max_rel_err(got, want) == 0.0);

        auto b = random_vec((size_t)n, 77 + n);
        kern::axpy(a.data(), b.data(), 0.37, got.data(), n);
        ref::axpy(a.data(), b.data(), 0.37, want.data(), n);
        CHECK(max_rel_err(got, want) == 0.0);
    }
}

TEST_CASE("kernels are deterministic across repeated calls") {
    const int m = 80, k = 80, n = 80; // past the grain with 2+ threads
    auto a = random_vec((size_t)m * k, 5);
    auto b = random_vec((size_t)k * n, 6);
    std::vector<double> r1((size_t)m * n), r2((size_t)m * n);
    kern::matmul(a.data(), b.data(), r1.data(), m, k, n);
    kern::matmul(a.data(), b.data(), r2.data(), m, k, n);
    CHECK(r1 == r2);
}
