// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecolora/error.hpp"
#include "ecolora/rng.hpp"
#include "ecolora/sparsifier.hpp"

using namespace ecolora;

namespace {

std::vector<float> gaussian(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> d(0.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double sq(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return s;
}

}  // namespace

TEST_CASE("adaptive_k examples") {
    SparsitySchedule s;
    s.k_max = 0.95;
    s.k_min_B = 0.5;
    s.gamma_B = 2.0;
    s.initial_loss = 2.0;
    CHECK(adaptive_k(s, MatrixKind::B, 2.0) == 0.95);
    CHECK(adaptive_k(s, MatrixKind::B, 1.0) == doctest::Approx(0.5 + 0.45 * std::exp(-2.0)).epsilon(1e-15));
    CHECK(adaptive_k(s, MatrixKind::B, 1.0) == doctest::Approx(0.5609009).epsilon(1e-6));
    CHECK(adaptive_k(s, MatrixKind::B, 5.0) == 0.95);  // loss above L0 clamps to k_max

    s.gamma_A = 0.0;
    CHECK(adaptive_k(s, MatrixKind::A, 0.01) == 0.95);
}

TEST_CASE("adaptive_k: monotone in loss and asymmetric between A and B") {
    SparsitySchedule s;
    s.initial_loss = 3.0;
    double prev_a = 1.0, prev_b = 1.0;
    for (double loss = 3.0; loss >= 0.0; loss -= 0.05) {
        const double a = adaptive_k(s, MatrixKind::A, loss);
        const double b = adaptive_k(s, MatrixKind::B, loss);
        CHECK(a <= prev_a);
        CHECK(b <= prev_b);
        CHECK(b <= a);
        CHECK(a >= s.k_min_A);
        CHECK(b >= s.k_min_B);
        prev_a = a;
        prev_b = b;
    }
}

TEST_CASE("schedule validation") {
    SparsitySchedule s;
    s.k_min_A = 0.99;
    CHECK_THROWS_AS(s.validate(), InvalidConfig);
    s = {};
    s.k_max = 0.0;
    CHECK_THROWS_AS(s.validate(), InvalidConfig);
    s = {};
    s.gamma_B = -1.0;
    CHECK_THROWS_AS(s.validate(), InvalidConfig);
}

TEST_CASE("kept_count and top_k_indices") {
    CHECK(kept_count(10, 0.5) == 5);
    CHECK(kept_count(10, 0.51) == 6);
    CHECK(kept_count(10, 1.0) == 10);
    CHECK(kept_count(3, 0.1) == 1);
    CHECK(kept_count(100, 0.29) == 29);  // 0.29 * 100 is 28.999999999999996 in double
    const std::vector<float> x{1.0f, -3.0f, 3.0f, 0.5f, -1.0f};
    CHECK(top_k_indices(x, 2) == std::vector<std::uint32_t>{1, 2});
    CHECK(top_k_indices(x, 3) == std::vector<std::uint32_t>{0, 1, 2});  // tie at |1|: lower index
    CHECK(top_k_indices(x, 0).empty());
}

TEST_CASE("sparsify_with_residual: worked example") {
    const std::vector<float> delta{3.0f, -1.0f, 0.5f, 0.0f};
    const auto r = sparsify_with_residual(delta, Residual::zeros(4), 0.5);
    REQUIRE(r.update.tensors.size() == 1);
    CHECK(r.update.tensors[0].positions == std::vector<std::uint32_t>{0, 1});
    CHECK(r.update.tensors[0].values == std::vector<float>{3.0f, -1.0f});
    CHECK(r.residual.values == std::vector<float>{0.0f, 0.0f, 0.5f, 0.0f});
}

TEST_CASE("sparsify_with_residual: k = 1 sends everything") {
    const auto x = gaussian(257, 4);
    const auto res = gaussian(257, 5);
    const auto r = sparsify_with_residual(x, Residual{res}, 1.0);
    const auto d = densify(r.update);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(d[i] == x[i] + res[i]);
    for (float v : r.residual.values) CHECK(v == 0.0f);
    CHECK(densify(sparsify_with_residual(x, Residual::zeros(x.size()), 1.0).update) == x);
}

TEST_CASE("sparsify_with_residual: zero vector and length mismatch") {
    const std::vector<float> z(8, 0.0f);
    const auto r = sparsify_with_residual(z, Residual::zeros(8), 0.5);
    CHECK(r.update.nonzeros() == 0);
    CHECK(r.update.dense_length() == 8);
    CHECK_THROWS_AS(sparsify_with_residual(z, Residual::zeros(7), 0.5), ContractViolation);
}

TEST_CASE("densify examples") {
    SparseUpdate empty;
    empty.tensors.push_back({0, MatrixKind::A, 5, {}, {}});
    CHECK(densify(empty) == std::vector<float>(5, 0.0f));
    SparseUpdate one;
    one.tensors.push_back({0, MatrixKind::A, 3, {2}, {7.0f}});
    CHECK(densify(one) == std::vector<float>{0.0f, 0.0f, 7.0f});
}

TEST_CASE("conservation against a dense oracle on random vectors") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const double k = 0.02 + 0.96 * static_cast<double>(seed) / 50.0;
        const auto delta = gaussian(1000, seed);
        const auto res = gaussian(1000, seed + 1000);
        const auto r = sparsify_with_residual(delta, Residual{res}, k);
        const auto sent = densify(r.update);
        for (std::size_t i = 0; i < delta.size(); ++i) {
            const double oracle = static_cast<double>(delta[i]) + res[i];
            CHECK(std::abs(sent[i] + r.residual.values[i] - oracle) <= 1e-6);
        }
        CHECK(r.update.nonzeros() == kept_count(1000, k));
    }
}

TEST_CASE("contraction: kept energy at least the kept fraction") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const std::size_t n = 1 + seed % 300;
        const double k = 0.01 + 0.99 * static_cast<double>((seed * 37) % 100) / 100.0;
        const auto x = gaussian(n, seed);
        const auto r = sparsify_with_residual(x, Residual::zeros(n), k);
        const double kept = static_cast<double>(kept_count(n, k)) / static_cast<double>(n);
        CHECK(sq(r.residual.values) <= (1.0 - kept) * sq(x) + 1e-9);
    }
}

TEST_CASE("sparsify_slices: per-kind k, in-place residual, offsets") {
    // Two slices: an A block of 10 followed by a B block of 10.
    const auto delta = gaussian(20, 1);
    std::vector<float> residual(20, 0.0f);
    const std::vector<TensorSlice> slices{{0, MatrixKind::A, 0, 10}, {1, MatrixKind::B, 10, 10}};
    const auto up = sparsify_slices(delta, residual, slices, 0.5, 0.2);
    REQUIRE(up.tensors.size() == 2);
    CHECK(up.tensors[0].nonzeros() == 5);
    CHECK(up.tensors[1].nonzeros() == 2);
    CHECK(up.tensors[1].kind == MatrixKind::B);
    CHECK(up.tensors[1].tensor_id == 1);
    CHECK(up.k_used_A == 0.5);
    CHECK(up.k_used_B == 0.2);
    std::vector<float> back(20, 0.0f);
    densify_into(up, slices, back);
    for (std::size_t i = 0; i < 20; ++i) CHECK(back[i] + residual[i] == doctest::Approx(delta[i]).epsilon(1e-7));
}

TEST_CASE("error feedback conserves the cumulative update over many rounds") {
    const std::size_t n = 10000;
    Residual res = Residual::zeros(n);
    std::vector<double> cum_delta(n, 0.0), cum_sent(n, 0.0);
    for (int t = 0; t < 100; ++t) {
        const auto d = gaussian(n, 100 + static_cast<std::uint64_t>(t));
        auto r = sparsify_with_residual(d, res, 0.1);
        const auto s = densify(r.update);
        for (std::size_t i = 0; i < n; ++i) {
            cum_delta[i] += d[i];
            cum_sent[i] += s[i];
        }
        res = std::move(r.residual);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(cum_sent[i] + res.values[i] - cum_delta[i]));
    CHECK(worst <= 1e-5);
}
