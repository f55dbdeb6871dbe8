#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ratecast/temporal.hpp"
#include "ratecast/tensor.hpp"

using namespace ratecast;

TEST_CASE("subsample grids are end-anchored multiples of the stride") {
    CHECK(subsample_indices(5, 0) == std::vector<int>{1, 2, 3, 4, 5});
    CHECK(subsample_indices(8, 1) == std::vector<int>{2, 4, 6, 8});
    CHECK(subsample_indices(8, 2) == std::vector<int>{4, 8});
    CHECK(subsample_indices(64, 3).size() == 8);
    CHECK(subsample_indices(64, 3).back() == 64);
    CHECK_THROWS_AS(subsample_indices(6, 2), ContractError);
    CHECK_THROWS_AS(subsample_indices(0, 0), ContractError);
}

TEST_CASE("each level keeps every second frame of the previous one") {
    const int total = 32;
    for (int lvl = 0; lvl + 1 <= 3; ++lvl) {
        const auto fine = subsample_indices(total, lvl);
        const auto coarse = subsample_indices(total, lvl + 1);
        REQUIRE(coarse.size() * 2 == fine.size());
        for (std::size_t j = 0; j < coarse.size(); ++j) CHECK(coarse[j] == fine[2 * j + 1]);
    }
}

TEST_CASE("assign_indices lays out an arithmetic grid") {
    const auto plan = assign_indices(4, 1, 1.0);
    CHECK(plan.indices == std::vector<double>{1.0, 3.0, 5.0, 7.0});
    CHECK(plan.level == 1);
    const auto shifted = assign_indices(4, 1, 101.5);
    CHECK(shifted.indices.front() == 101.5);
    CHECK(shifted.indices.back() == 107.5);
    CHECK_THROWS_AS(assign_indices(4, 0, -1.0), ContractError);
    CHECK_THROWS_AS(assign_indices(4, 0, 2000.0), ContractError);
}

TEST_CASE("offset draws pass a uniformity KS test") {
    const int n = 100000;
    const double span = 1000.0;
    Rng rng(99);
    std::vector<double> u(n);
    for (auto& x : u) x = sample_t_start(span, rng) / span;
    std::sort(u.begin(), u.end());
    double d_stat = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lo = double(i) / n, hi = double(i + 1) / n;
        d_stat = std::max({d_stat, u[std::size_t(i)] - lo, hi - u[std::size_t(i)]});
    }
    // alpha = 0.01 critical value for large n
    CHECK(d_stat < 1.6276 / std::sqrt(double(n)));
    CHECK(u.front() >= 0.0);
    CHECK(u.back() <= 1.0);
}

TEST_CASE("rope angles follow the inverse-frequency ladder") {
    RopeParams p{10000.0, 8};
    CHECK(rope_angle(0.0, 3, p) == 0.0);
    CHECK(rope_angle(5.0, 0, p) == 5.0);
    for (int k = 0; k < 4; ++k) {
        const double want = 3.25 * std::pow(10000.0, -2.0 * k / 8.0);
        CHECK(rope_angle(3.25, k, p) == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("pair rotation preserves norm and composes additively") {
    RopeParams p{10000.0, 6};
    const std::vector<double> v{0.3, -1.2, 0.8, 0.1, -0.5, 2.0};

    const auto r1 = rope_apply(v, 7.5, p);
    double n_in = 0.0, n_out = 0.0;
    for (int i = 0; i < 6; ++i) {
        n_in += v[std::size_t(i)] * v[std::size_t(i)];
        n_out += r1[std::size_t(i)] * r1[std::size_t(i)];
    }
    CHECK(n_out == doctest::Approx(n_in).epsilon(1e-12));

    const auto two_step = rope_apply(rope_apply(v, 3.0, p), 4.5, p);
    for (int i = 0; i < 6; ++i)
        CHECK(two_step[std::size_t(i)] == doctest::Approx(r1[std::size_t(i)]).epsilon(1e-9));
}

TEST_CASE("rope tables reproduce rope_apply through the tensor path") {
    RopeParams p{10000.0, 4};
    const std::vector<double> indices{0.0, 2.5, 17.0};
    auto tables = rope_tables<double>(indices, p);
    CHECK(tables.cos_t.shape() == Shape{3, 4});

    Rng rng(5);
    auto x = TensorD::randn({3, 4}, rng);
    auto rotated = add(mul(x, tables.cos_t), mul(rotate_pairs(x), tables.sin_t));
    for (int row = 0; row < 3; ++row) {
        std::vector<double> v(4);
        for (int c = 0; c < 4; ++c) v[std::size_t(c)] = x.at(row, c);
        const auto want = rope_apply(v, indices[std::size_t(row)], p);
        for (int c = 0; c < 4; ++c)
            CHECK(rotated.at(row, c) == doctest::Approx(want[std::size_t(c)]).epsilon(1e-12));
    }
}

TEST_CASE("relative angles are shift invariant") {
    RopeParams p{10000.0, 8};
    for (int k = 0; k < 4; ++k) {
        const double base = rope_angle(9.0, k, p) - rope_angle(4.0, k, p);
        const double moved = rope_angle(9.0 + 137.25, k, p) - rope_angle(4.0 + 137.25, k, p);
        CHECK(moved == doctest::Approx(base).epsilon(1e-9));
    }
}
