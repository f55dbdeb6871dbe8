// Self-check suites behind the `verify` subcommand: finite-difference
// gradient audits, rotary-index invariances, subsampling identities, anchor
// preservation through a real (randomly initialized) sampling run, and the
// cost model against both direct summation and instrumented execution.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ratecast/gradcheck.hpp"
#include "ratecast/scheduler.hpp"
#include "ratecast/trainer.hpp"

namespace ratecast {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace verify_detail {

inline std::vector<TrainItem<double>> tiny_batch(const ModelConfig& cfg, int frames, int items,
                                                 std::uint64_t seed) {
    std::vector<TrainItem<double>> batch;
    for (int b = 0; b < items; ++b) {
        Rng rng(derive_seed(seed, "verify-batch", std::uint64_t(b)));
        TrainItem<double> item;
        item.frame_count = frames;
        item.frame_dim = cfg.frame_dim;
        item.level = 0;
        item.frames.resize(std::size_t(frames) * cfg.frame_dim);
        for (auto& x : item.frames) x = rng.gaussian();
        item.prompt.resize(std::size_t(cfg.cond_dim));
        for (auto& x : item.prompt) x = rng.gaussian();
        item.plan = assign_indices(frames, 0, double(b) * 3.0);
        if (b % 2 == 1)
            item.cond = sample_training_condition(item.frames, frames, cfg.frame_dim, rng, 0.3);
        batch.push_back(std::move(item));
    }
    return batch;
}

inline std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return std::string(buf);
}

}  // namespace verify_detail

// End-to-end loss gradients vs central finite differences on a tiny
// double-precision model.
inline SuiteResult verify_grad() {
    ModelConfig cfg;
    cfg.frame_dim = 4;
    cfg.width = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.cond_dim = 8;
    auto params = ModelParams<double>::init(cfg, 11);
    auto batch = verify_detail::tiny_batch(cfg, 6, 2, 17);
    NoiseSchedule sched;

    std::vector<Tensor<double>> leaves;
    for (auto& [name, t] : params.named()) leaves.push_back(*t);
    auto loss_fn = [&] {
        Rng rng(23);
        return fm_loss(params, cfg, batch, sched, rng);
    };
    const auto report = gradient_check<double>(loss_fn, leaves, 1e-5, 4, 29);
    SuiteResult res{"grad", report.within(1e-4),
                    verify_detail::fmt("max relative error %.3g over %g coordinates",
                                       report.max_rel_err, double(report.coords_checked))};
    return res;
}

// A common shift of all temporal indices must not move the output (the model
// only sees index differences); permuting frames with their indices must
// permute the output rows and nothing else.
inline SuiteResult verify_rope() {
    ModelConfig cfg;
    cfg.frame_dim = 6;
    cfg.width = 32;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.cond_dim = 8;
    auto params = ModelParams<double>::init(cfg, 31);
    NoGradGuard ng;

    const int frames = 8;
    Rng rng(37);
    std::vector<double> data(std::size_t(frames) * cfg.in_channels());
    for (auto& x : data) x = rng.gaussian();
    auto channels = Tensor<double>::from({frames, cfg.in_channels()}, data);
    PromptVector<double> prompt;
    prompt.values.resize(std::size_t(cfg.cond_dim));
    for (auto& x : prompt.values) x = rng.gaussian();

    auto plan = assign_indices(frames, 1, 5.0);
    auto shifted = plan;
    shifted.t_start += 37.25;
    for (auto& idx : shifted.indices) idx += 37.25;

    const auto base = forward(params, cfg, channels, 0.4, prompt, plan);
    const auto moved = forward(params, cfg, channels, 0.4, prompt, shifted);
    double max_shift_err = 0.0;
    for (std::int64_t i = 0; i < base.size(); ++i)
        max_shift_err = std::max(max_shift_err, std::abs(base.at(i) - moved.at(i)));

    // permutation: reverse the frames together with their indices
    std::vector<double> rev_data(data.size());
    TemporalIndexPlan rev_plan = plan;
    for (int j = 0; j < frames; ++j) {
        std::copy_n(data.begin() + std::int64_t(frames - 1 - j) * cfg.in_channels(),
                    cfg.in_channels(), rev_data.begin() + std::int64_t(j) * cfg.in_channels());
        rev_plan.indices[std::size_t(j)] = plan.indices[std::size_t(frames - 1 - j)];
    }
    const auto rev_out = forward(params, cfg, Tensor<double>::from({frames, cfg.in_channels()},
                                                                   rev_data),
                                 0.4, prompt, rev_plan);
    double max_perm_err = 0.0;
    for (int j = 0; j < frames; ++j)
        for (int c = 0; c < cfg.frame_dim; ++c)
            max_perm_err = std::max(
                std::abs(base.at(frames - 1 - j, c) - rev_out.at(j, c)), max_perm_err);

    const double worst = std::max(max_shift_err, max_perm_err);
    return {"rope", worst < 1e-9,
            verify_detail::fmt("shift error %.3g, permutation error %.3g", max_shift_err,
                               max_perm_err)};
}

// Rendering at a coarse rate must equal the stride-subsample of finer
// renders, bitwise, and index sets must follow the stride grid.
inline SuiteResult verify_subsample() {
    int failures = 0;
    std::string detail;
    for (int s = 0; s < 6; ++s) {
        const auto ds = make_dataset(1, s % 2 == 0 ? 0.0 : 1.0, 64, 12, 900 + std::uint64_t(s));
        const auto& scene = ds.scenes[0];
        const auto v0 = render_scene_level(scene, ds.frame_dim, 0);
        for (int level = 1; level <= 2; ++level) {
            const auto vi = render_scene_level(scene, ds.frame_dim, level);
            const auto idx = subsample_indices(v0.frames, level);
            if (int(idx.size()) != vi.frames) {
                ++failures;
                continue;
            }
            for (int j = 0; j < vi.frames; ++j) {
                const float* coarse = vi.row(j);
                const float* fine = v0.row(idx[std::size_t(j)] - 1);
                for (int c = 0; c < ds.frame_dim; ++c)
                    if (coarse[c] != fine[c]) ++failures;
            }
        }
    }
    return {"subsample", failures == 0,
            failures == 0 ? "stride-subsampling identities hold bitwise"
                          : std::to_string(failures) + " mismatches"};
}

// A real multi-stage sampling run (random weights, few steps) must keep every
// coarser-level frame bitwise intact in all finer outputs, cover each level's
// index set exactly, and honor injected first-frame conditions.
inline SuiteResult verify_anchor() {
    ModelConfig cfg;
    cfg.frame_dim = 8;
    cfg.width = 32;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.cond_dim = 8;
    auto params = ModelParams<float>::init(cfg, 41);
    auto par = parse_config("f(6,12,24)m(1,2,4)s(2,2,2)");
    const int n = 32;

    std::vector<float> prompt(std::size_t(cfg.cond_dim), 0.25f);
    MultiMaskCondition<float> first_frame;
    first_frame.entries[0] = std::vector<float>(std::size_t(cfg.frame_dim), 0.5f);

    std::vector<VideoSequence> stages;
    const auto out = generate(params, cfg, par, prompt, first_frame, n, 97, {}, &stages);

    int violations = 0;
    for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
        const auto& coarse = stages[i];
        for (int j = 0; j < coarse.frames; ++j) {
            const double idx = coarse.index_of(j);
            for (std::size_t k = i + 1; k < stages.size(); ++k) {
                const auto& fine = stages[k];
                const int jj = int(std::llround((idx - fine.t_start) / fine.stride()));
                for (int c = 0; c < cfg.frame_dim; ++c)
                    if (coarse.row(j)[c] != fine.row(jj)[c]) ++violations;
            }
        }
    }
    for (int c = 0; c < cfg.frame_dim; ++c)
        if (out.row(0)[c] != 0.5f) ++violations;

    const auto rerun = generate(params, cfg, par, prompt, first_frame, n, 97,
                                GenerateOptions{.workers = 4});
    if (rerun.data != out.data) ++violations;

    return {"anchor", violations == 0,
            violations == 0 ? "anchors, conditions and worker counts all bitwise stable"
                            : std::to_string(violations) + " violations"};
}

// Closed-form cost against direct summation and against an instrumented run.
inline SuiteResult verify_cost() {
    // direct summation with independently computed integer-power terms
    for (int w = 2; w <= 8; ++w)
        for (int k = 1; k <= 16; ++k)
            for (int intra = 0; intra <= 1; ++intra) {
                double sum = 0.0;
                for (int i = 0; i < k; ++i) {
                    unsigned __int128 num = 1, den = 1;
                    for (int p = 0; p < i; ++p) num *= 4;
                    for (int p = 0; p < i; ++p) den *= intra ? std::uint64_t(w) * w : std::uint64_t(w);
                    sum += double(num) / double(den);
                }
                double lead = 512.0 * 512.0;
                for (int i = 0; i < k; ++i) lead /= 4.0;
                const double direct = lead * sum;
                const double bound = analytic_bound(512, k, w, intra != 0);
                if (direct != bound)
                    return {"cost", false,
                            verify_detail::fmt("bound mismatch at W=%g K=%g", double(w),
                                               double(k))};
            }
    if (analytic_bound(512, 3, 4, false) != 12288.0)
        return {"cost", false, "W=4 K=3 N=512 reference value is off"};

    // instrumented agreement on a small model
    ModelConfig cfg;
    cfg.frame_dim = 8;
    cfg.width = 32;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.cond_dim = 8;
    auto params = ModelParams<float>::init(cfg, 53);
    auto par = parse_config("f(12,24)m(1,2)s(2,2)");
    std::vector<float> prompt(std::size_t(cfg.cond_dim), 0.0f);
    const int n = 16;
    GenerateStats stats;
    generate(params, cfg, par, prompt, MultiMaskCondition<float>{}, n, 3, {}, nullptr, &stats);
    const auto predicted = flop_count(cfg, par, n).total;
    if (stats.flops != predicted)
        return {"cost", false,
                verify_detail::fmt("instrumented %g vs predicted %g multiply-adds",
                                   double(stats.flops), double(predicted))};
    return {"cost", true, "direct summation, reference value and instrumentation agree"};
}

inline std::vector<SuiteResult> run_verify_suites(const std::string& which) {
    std::vector<SuiteResult> results;
    const auto want = [&](const char* name) { return which == "all" || which == name; };
    if (want("grad")) results.push_back(verify_grad());
    if (want("rope")) results.push_back(verify_rope());
    if (want("subsample")) results.push_back(verify_subsample());
    if (want("anchor")) results.push_back(verify_anchor());
    if (want("cost")) results.push_back(verify_cost());
    check_config(!results.empty(), "unknown suite '" + which +
                                       "'; valid: all, grad, rope, subsample, anchor, cost");
    return results;
}

}  // namespace ratecast
