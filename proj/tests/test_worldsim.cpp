#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ratecast/io.hpp"
#include "ratecast/worldsim.hpp"

using namespace ratecast;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

SceneParams demo_scene() {
    SceneParams s;
    ShotParams p;
    p.freq = 0.01;
    p.phase = 0.25;
    p.sigma = 2.0;
    p.amp = 1.1;
    p.bg_amp = 0.08;
    p.bg_freq = 0.02;
    s.shots = {p};
    s.duration = 64;
    return s;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("trajectory and cell values follow the closed form") {
    const auto s = demo_scene();
    const int d = 16;
    const auto& p = s.shots[0];
    for (double tau : {0.0, 7.0, 31.5, 63.0}) {
        const double want_c = (d - 1) * (0.5 + 0.35 * std::sin(kTau * (p.freq * tau + p.phase)));
        CHECK(scene_center(s, d, tau) == doctest::Approx(want_c).epsilon(1e-12));
        for (int cell : {0, 5, 15}) {
            const double dx = cell - want_c;
            const double want = p.amp * std::exp(-dx * dx / (2 * p.sigma * p.sigma)) +
                                p.bg_amp * std::sin(kTau * p.bg_freq * tau + kTau * cell / d);
            CHECK(scene_value(s, d, cell, tau) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("multi-shot scenes switch parameters at the boundary") {
    auto s = demo_scene();
    ShotParams second = s.shots[0];
    second.amp = 0.5;
    s.shots.push_back(second);
    s.boundaries = {32};
    s.validate();
    CHECK(s.shot_at(31.9).amp == 1.1);
    CHECK(s.shot_at(32.0).amp == 0.5);
    CHECK(s.shot_at(63.0).amp == 0.5);
}

TEST_CASE("a coarse render equals the subsampled fine render bitwise") {
    const auto s = demo_scene();
    const int d = 16;
    const auto fine = render_scene_level(s, d, 0);
    REQUIRE(fine.frames == 64);
    for (int level : {1, 2, 3}) {
        const auto coarse = render_scene_level(s, d, level);
        const int stride = 1 << level;
        REQUIRE(coarse.frames == 64 / stride);
        for (int j = 0; j < coarse.frames; ++j) {
            const int fine_j = (j + 1) * stride - 1;
            CHECK(coarse.index_of(j) == fine.index_of(fine_j));
            for (int c = 0; c < d; ++c) CHECK(coarse.row(j)[c] == fine.row(fine_j)[c]);
        }
    }
    auto odd = s;
    odd.duration = 30;
    CHECK_THROWS_AS(render_scene_level(odd, d, 2), ContractError);
}

TEST_CASE("prompt encoding is exact and zero-padded") {
    const auto s = demo_scene();
    const auto v = prompt_of(s, 10);
    REQUIRE(v.size() == 10);
    CHECK(v[0] == doctest::Approx((0.01 - 0.012) / 0.008).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(std::sin(kTau * 0.25)).epsilon(1e-15));
    CHECK(v[2] == doctest::Approx(std::cos(kTau * 0.25)).epsilon(1e-15));
    CHECK(v[3] == doctest::Approx((2.0 - 1.85) / 0.65).epsilon(1e-15));
    CHECK(v[4] == doctest::Approx((1.1 - 1.0) / 0.2).epsilon(1e-15));
    CHECK(v[5] == doctest::Approx((0.08 - 0.1) / 0.05).epsilon(1e-15));
    CHECK(v[6] == doctest::Approx((0.02 - 0.03) / 0.02).epsilon(1e-15));
    CHECK(v[7] == 0.0);
    CHECK(v[9] == 0.0);
    CHECK_THROWS_AS(prompt_of(s, 4), ConfigError);
}

TEST_CASE("datasets are reproducible and bounded") {
    const auto a = make_dataset(50, 0.3, 64, 16, 42);
    const auto b = make_dataset(50, 0.3, 64, 16, 42);
    CHECK(dataset_scenes_json(a) == dataset_scenes_json(b));

    int multi = 0;
    for (const auto& s : a.scenes) {
        s.validate();
        for (const auto& p : s.shots) {
            CHECK(p.freq >= 0.004);
            CHECK(p.freq <= 0.02);
            CHECK(p.sigma >= 1.2);
            CHECK(p.sigma <= 2.5);
            CHECK(p.amp >= 0.8);
            CHECK(p.amp <= 1.2);
            CHECK(p.bg_amp >= 0.05);
            CHECK(p.bg_amp <= 0.15);
            CHECK(p.bg_freq >= 0.01);
            CHECK(p.bg_freq <= 0.05);
        }
        if (s.shots.size() > 1) {
            ++multi;
            REQUIRE(s.boundaries.size() == 1);
            CHECK(s.boundaries[0] >= s.duration / 4);
            CHECK(s.boundaries[0] < 3 * s.duration / 4);
        }
    }
    // Binomial(50, 0.3): mean 15, sd 3.24; 4 sigma keeps any fixed seed honest
    CHECK(multi >= 2);
    CHECK(multi <= 28);

    const auto c = make_dataset(50, 0.3, 64, 16, 43);
    CHECK(dataset_scenes_json(a) != dataset_scenes_json(c));
}

TEST_CASE("evaluate scores the exact render as perfect") {
    const auto s = demo_scene();
    const auto gt = render_scene_level(s, 16, 0);
    const auto r = evaluate(gt, s);
    // Rows are float32, the reference is double: only quantization remains.
    CHECK(r.mse < 1e-13);
    CHECK(r.mse_over_variance < 1e-12);
    CHECK(std::abs(r.drift_slope) < 1e-14);
    CHECK(r.anchor_violations == 0);
    CHECK(r.signal_variance > 0.0);
    REQUIRE(int(r.per_frame_mse.size()) == gt.frames);
}

TEST_CASE("evaluate recovers injected noise power and drift slope") {
    const auto s = demo_scene();
    auto noisy = render_scene_level(s, 16, 0);
    Rng rng(77);
    const double noise_sd = 0.2;
    for (auto& v : noisy.data) v += float(noise_sd * rng.gaussian());
    const auto r = evaluate(noisy, s);
    CHECK(r.mse == doctest::Approx(noise_sd * noise_sd).epsilon(0.1));

    // per-frame error c*j exactly -> OLS slope c
    auto drift = render_scene_level(s, 16, 0);
    const double c = 0.003;
    for (int j = 0; j < drift.frames; ++j) {
        const float bump = float(std::sqrt(c * j));
        for (int k = 0; k < drift.frame_dim; ++k) drift.row(j)[k] += bump;
    }
    const auto rd = evaluate(drift, s);
    for (int j = 0; j < drift.frames; ++j)
        CHECK(rd.per_frame_mse[std::size_t(j)] == doctest::Approx(c * j).epsilon(1e-4));
    CHECK(rd.drift_slope == doctest::Approx(c).epsilon(1e-4));
}

TEST_CASE("evaluate counts cross-level anchor mismatches") {
    const auto s = demo_scene();
    const auto fine = render_scene_level(s, 16, 0);
    auto coarse = render_scene_level(s, 16, 1);
    CHECK(evaluate(fine, s, {coarse}).anchor_violations == 0);
    coarse.row(3)[5] += 0.5f;
    const auto r = evaluate(fine, s, {coarse});
    CHECK(r.anchor_violations == 1);
}

TEST_CASE("sequence files round-trip byte for byte") {
    const auto s = demo_scene();
    const auto seq = render_scene(s, 16, 1, 21.0);
    const auto p1 = tmp_path("ratecast_rt1.tmv");
    const auto p2 = tmp_path("ratecast_rt2.tmv");
    save_tmv(p1, seq);
    const auto loaded = load_tmv(p1);
    CHECK(loaded.frames == seq.frames);
    CHECK(loaded.level == 1);
    CHECK(loaded.t_start == 21.0);
    CHECK(loaded.data == seq.data);
    save_tmv(p2, loaded);
    CHECK(read_file_bytes(p1) == read_file_bytes(p2));

    auto bytes = read_file_bytes(p1);
    bytes[0] = 'X';
    write_file_bytes(p2, bytes);
    CHECK_THROWS_AS(load_tmv(p2), IoError);

    bytes[0] = 'T';
    bytes.push_back(0);
    write_file_bytes(p2, bytes);
    CHECK_THROWS_AS(load_tmv(p2), IoError);

    bytes.pop_back();
    bytes.pop_back();
    write_file_bytes(p2, bytes);
    CHECK_THROWS_AS(load_tmv(p2), IoError);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("dataset files and scene json round-trip") {
    const auto ds = make_dataset(12, 0.4, 32, 8, 5);
    const auto p1 = tmp_path("ratecast_ds1.tmd");
    const auto p2 = tmp_path("ratecast_ds2.tmd");
    save_dataset(p1, ds);
    const auto loaded = load_dataset(p1);
    CHECK(loaded.frame_dim == ds.frame_dim);
    CHECK(loaded.base_fps == ds.base_fps);
    REQUIRE(loaded.scenes.size() == ds.scenes.size());
    save_dataset(p2, loaded);
    CHECK(read_file_bytes(p1) == read_file_bytes(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());

    const auto& scene = ds.scenes[3];
    const auto back = scene_from_json(scene_to_json(scene));
    CHECK(back.duration == scene.duration);
    CHECK(back.boundaries == scene.boundaries);
    REQUIRE(back.shots.size() == scene.shots.size());
    for (std::size_t i = 0; i < scene.shots.size(); ++i) {
        CHECK(back.shots[i].freq == scene.shots[i].freq);
        CHECK(back.shots[i].phase == scene.shots[i].phase);
        CHECK(back.shots[i].sigma == scene.shots[i].sigma);
        CHECK(back.shots[i].amp == scene.shots[i].amp);
        CHECK(back.shots[i].bg_amp == scene.shots[i].bg_amp);
        CHECK(back.shots[i].bg_freq == scene.shots[i].bg_freq);
    }
}
