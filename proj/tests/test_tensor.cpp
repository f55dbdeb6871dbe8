#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ratecast/gradcheck.hpp"
#include "ratecast/tensor.hpp"

using namespace ratecast;

namespace {

TensorD randn2(int r, int c, std::uint64_t seed, bool track = true) {
    Rng rng(seed);
    return TensorD::randn({r, c}, rng, 1.0, track);
}

// Scalarize any output so gradient_check sees a single loss value.
TensorD against_target(const TensorD& y, std::uint64_t seed) {
    Rng rng(seed);
    auto target = TensorD::randn(y.shape(), rng);
    return mse(y, target);
}

template <typename F>
GradCheckReport gc(F&& f, std::vector<TensorD> leaves) {
    return gradient_check(std::forward<F>(f), std::move(leaves));
}

}  // namespace

TEST_CASE("elementwise forward values") {
    auto a = TensorD::from({2, 2}, {1, 2, 3, 4});
    auto b = TensorD::from({2, 2}, {5, 6, 7, 8});
    auto s = add(a, b);
    CHECK(s.at(0) == 6.0);
    CHECK(s.at(3) == 12.0);
    CHECK(sub(b, a).at(2) == 4.0);
    CHECK(mul(a, b).at(1) == 12.0);
    CHECK(scale(a, 0.5).at(3) == 2.0);
    CHECK_THROWS_AS(add(a, TensorD::zeros({3, 2})), DimensionError);
}

TEST_CASE("matmul forward against hand result") {
    auto a = TensorD::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = TensorD::from({3, 2}, {7, 8, 9, 10, 11, 12});
    auto c = matmul(a, b);
    CHECK(c.at(0, 0) == doctest::Approx(58).epsilon(1e-14));
    CHECK(c.at(0, 1) == doctest::Approx(64).epsilon(1e-14));
    CHECK(c.at(1, 0) == doctest::Approx(139).epsilon(1e-14));
    CHECK(c.at(1, 1) == doctest::Approx(154).epsilon(1e-14));
    CHECK_THROWS_AS(matmul(a, TensorD::zeros({2, 2})), DimensionError);
}

TEST_CASE("softmax rows sum to one and order-preserve") {
    auto x = randn2(4, 7, 11, false);
    auto p = softmax_rows(x);
    for (int r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int c = 0; c < 7; ++c) {
            CHECK(p.at(r, c) > 0.0);
            s += p.at(r, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto two = TensorD::from({1, 2}, {0.0, std::log(2.0)});
    auto q = softmax_rows(two);
    CHECK(q.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(q.at(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("rms_norm closed form") {
    auto x = TensorD::from({1, 2}, {3.0, 4.0});
    auto g = TensorD::from({1, 2}, {1.0, 2.0});
    auto y = rms_norm(x, g);
    const double rms = std::sqrt((9.0 + 16.0) / 2.0 + 1e-6);
    CHECK(y.at(0) == doctest::Approx(3.0 / rms).epsilon(1e-12));
    CHECK(y.at(1) == doctest::Approx(2.0 * 4.0 / rms).epsilon(1e-12));
}

TEST_CASE("silu fixed points") {
    auto x = TensorD::from({1, 3}, {0.0, 1.0, -20.0});
    auto y = silu(x);
    CHECK(y.at(0) == 0.0);
    CHECK(y.at(1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
    CHECK(std::abs(y.at(2)) < 1e-7);
}

TEST_CASE("rotate_pairs swaps and negates in pairs") {
    auto x = TensorD::from({1, 4}, {1, 2, 3, 4});
    auto y = rotate_pairs(x);
    CHECK(y.at(0) == -2.0);
    CHECK(y.at(1) == 1.0);
    CHECK(y.at(2) == -4.0);
    CHECK(y.at(3) == 3.0);
}

TEST_CASE("concat and slice are inverse") {
    auto a = randn2(3, 2, 1, false);
    auto b = randn2(3, 4, 2, false);
    auto cat = concat_channels(a, b);
    CHECK(cat.shape() == Shape{3, 6});
    auto back = slice_channels(cat, 2, 4);
    for (std::int64_t i = 0; i < back.size(); ++i) CHECK(back.at(i) == b.at(i));
}

TEST_CASE("mse and sum scalars") {
    auto a = TensorD::from({1, 2}, {1.0, 3.0});
    auto b = TensorD::from({1, 2}, {2.0, 5.0});
    CHECK(mse(a, b).item() == doctest::Approx((1.0 + 4.0) / 2.0).epsilon(1e-14));
    CHECK(sum(a).item() == 4.0);
}

TEST_CASE("gradients match central finite differences per op") {
    const double tol = 1e-6;

    SUBCASE("add/sub/mul/scale") {
        auto a = randn2(3, 4, 21);
        auto b = randn2(3, 4, 22);
        auto f = [&] { return against_target(add(mul(a, b), sub(scale(a, 0.7), b)), 9); };
        auto rep = gc(f, {a, b});
        CHECK(rep.max_rel_err < tol);
    }
    SUBCASE("add_rowvec") {
        auto a = randn2(4, 3, 23);
        auto v = randn2(1, 3, 24);
        auto f = [&] { return against_target(add_rowvec(a, v), 10); };
        CHECK(gc(f, {a, v}).max_rel_err < tol);
    }
    SUBCASE("matmul both sides") {
        auto a = randn2(3, 5, 25);
        auto b = randn2(5, 2, 26);
        auto f = [&] { return against_target(matmul(a, b), 11); };
        CHECK(gc(f, {a, b}).max_rel_err < tol);
    }
    SUBCASE("matmul with transposed operands") {
        auto a = randn2(5, 3, 27);
        auto b = randn2(5, 2, 28);
        auto f = [&] { return against_target(matmul(transpose(a), b), 12); };
        CHECK(gc(f, {a, b}).max_rel_err < tol);
    }
    SUBCASE("softmax_rows") {
        auto a = randn2(3, 6, 29);
        auto f = [&] { return against_target(softmax_rows(a), 13); };
        CHECK(gc(f, {a}).max_rel_err < tol);
    }
    SUBCASE("rms_norm input and gain") {
        auto a = randn2(3, 8, 30);
        auto g = randn2(1, 8, 31);
        auto f = [&] { return against_target(rms_norm(a, g), 14); };
        CHECK(gc(f, {a, g}).max_rel_err < tol);
    }
    SUBCASE("silu") {
        auto a = randn2(4, 4, 32);
        auto f = [&] { return against_target(silu(a), 15); };
        CHECK(gc(f, {a}).max_rel_err < tol);
    }
    SUBCASE("concat and slice") {
        auto a = randn2(2, 3, 33);
        auto b = randn2(2, 5, 34);
        auto f = [&] {
            return against_target(slice_channels(concat_channels(a, b), 1, 6), 16);
        };
        CHECK(gc(f, {a, b}).max_rel_err < tol);
    }
    SUBCASE("rotate_pairs") {
        auto a = randn2(3, 6, 35);
        auto f = [&] { return against_target(rotate_pairs(a), 17); };
        CHECK(gc(f, {a}).max_rel_err < tol);
    }
    SUBCASE("mse both arguments") {
        auto a = randn2(3, 3, 36);
        auto b = randn2(3, 3, 37);
        auto f = [&] { return mse(a, b); };
        CHECK(gc(f, {a, b}).max_rel_err < tol);
    }
    SUBCASE("sum") {
        auto a = randn2(2, 5, 38);
        auto f = [&] { return sum(mul(a, a)); };
        CHECK(gc(f, {a}).max_rel_err < tol);
    }
}

TEST_CASE("gradient accumulates when a tensor is reused") {
    auto x = TensorD::from({1, 2}, {1.5, -2.0}, true);
    auto y = sum(add(x, x));
    backward(y);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
}

TEST_CASE("flop counter tracks forward work only") {
    auto a = randn2(4, 6, 41);
    auto b = randn2(6, 3, 42);
    flops_reset();
    auto c = matmul(a, b);
    CHECK(flops_count() == flopcost::matmul(4, 6, 3));

    flops_reset();
    auto loss = mse(c, TensorD::zeros({4, 3}));
    const auto before = flops_count();
    CHECK(before == flopcost::mse(12));
    backward(loss);
    CHECK(flops_count() == before);

    // still counted with gradients disabled
    NoGradGuard no_grad;
    flops_reset();
    silu(TensorD::zeros({2, 8}));
    CHECK(flops_count() == flopcost::silu(16));
}

TEST_CASE("NoGradGuard stops tape growth") {
    auto a = randn2(2, 2, 43);
    {
        NoGradGuard no_grad;
        auto y = mul(a, a);
        CHECK_FALSE(y.grad_enabled());
    }
    auto y = mul(a, a);
    CHECK(y.grad_enabled());
}

TEST_CASE("all_finite flags injected NaN and Inf") {
    auto a = TensorD::from({1, 3}, {1.0, 2.0, 3.0});
    CHECK(all_finite(a));
    a.mutable_vals()[1] = std::nan("");
    CHECK_FALSE(all_finite(a));
    a.mutable_vals()[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(all_finite(a));
}
