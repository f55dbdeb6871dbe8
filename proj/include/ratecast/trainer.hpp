// Two-stage curriculum: stage 1 trains on full-rate clips with sparse frame
// conditioning; stage 2 mixes rate levels (level-homogeneous batches),
// randomizes the temporal offset of each clip, and adds the condition
// patterns the sampler will rely on (anchor grids, prefixes), plus shot-wise
// condition dropping on multi-shot clips.
//
// All randomness is derived statelessly from (seed, purpose, step, slot), so
// runs are bit-reproducible and resuming from a checkpoint replays the exact
// tail of an uninterrupted run.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ratecast/checkpoint.hpp"
#include "ratecast/denoiser.hpp"
#include "ratecast/multimask.hpp"
#include "ratecast/schedule.hpp"
#include "ratecast/tensor.hpp"
#include "ratecast/worldsim.hpp"

namespace ratecast {

struct TrainConfig {
    TrainStage stage = TrainStage::single_rate;
    double learning_rate = 5e-4;  // reference stage-2 fine-tune value: 2e-5
    double weight_decay = 1e-4;
    int batch_size = 32;
    int warmup_steps = 2000;
    double ema_decay = 0.999;
    int steps = 2000;
    std::vector<double> rate_fps = {6.0, 12.0, 24.0};
    std::uint64_t seed = 0;
    double t_max = kDefaultTMax;
    int clip_frames = 24;  // stage-1 clip length; stage-2 crops are capped here too
    double cond_max_fraction = 0.15;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const {
        check_config(learning_rate >= 0.0 && weight_decay >= 0.0, "negative optimizer rates");
        check_config(batch_size > 0 && steps >= 0 && warmup_steps >= 0, "non-positive schedule");
        check_config(ema_decay > 0.0 && ema_decay < 1.0, "ema decay outside (0,1)");
        check_config(!rate_fps.empty(), "empty rate set");
        for (double f : rate_fps) check_config(f > 0.0, "non-positive frame rate");
        check_config(clip_frames >= 4, "clip length below 4 frames");
        check_config(cond_max_fraction >= 0.0 && cond_max_fraction <= 1.0,
                     "condition fraction outside [0,1]");
        check_config(t_max > 0.0, "t_max must be positive");
    }

    // Rate levels against the dataset's full rate: level = log2(base/fps).
    std::vector<int> levels(double base_fps) const {
        std::vector<int> out;
        for (double f : rate_fps) {
            const double ratio = base_fps / f;
            const int level = int(std::lround(std::log2(ratio)));
            check_config(level >= 0 && std::abs(double(1 << level) - ratio) < 1e-9,
                         "rate " + std::to_string(f) + " is not base/2^i of base " +
                             std::to_string(base_fps));
            out.push_back(level);
        }
        return out;
    }
};

template <typename Real>
struct TrainItem {
    std::vector<Real> frames;  // T x D clean clip, row-major
    int frame_count = 0;
    int frame_dim = 0;
    MultiMaskCondition<Real> cond;
    std::vector<Real> prompt;
    TemporalIndexPlan plan;
    int level = 0;
    int scene = -1;
};

// Flow-matching objective over one level-homogeneous batch. Per item: sample
// t, draw unit gaussian noise z1, feed the interpolant through the model with
// the item's conditions, and regress the velocity z1 - z0. The mean over
// batch, frames and channels is returned as a scalar on the tape.
template <typename Real>
Tensor<Real> fm_loss(const ModelParams<Real>& params, const ModelConfig& cfg,
                     const std::vector<TrainItem<Real>>& batch, const NoiseSchedule& sched,
                     Rng& rng) {
    check_contract(!batch.empty(), "empty training batch");
    const int t_frames = batch[0].frame_count;
    const int d = batch[0].frame_dim;
    for (const auto& item : batch)
        check_contract(item.frame_count == t_frames && item.level == batch[0].level &&
                           item.frame_dim == d,
                       "batch items must share frame count, dim and rate level");

    Tensor<Real> acc;
    for (const auto& item : batch) {
        const double t = sample_t(sched, rng);
        const std::size_t n = item.frames.size();
        std::vector<Real> noised(n), target(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double z1 = rng.gaussian();
            const double z0 = double(item.frames[i]);
            noised[i] = Real((1.0 - t) * z0 + t * z1);
            target[i] = Real(z1 - z0);
        }
        auto z_t = Tensor<Real>::from({t_frames, d}, std::move(noised));
        auto channels = build_conditioned_input(z_t, item.cond);
        PromptVector<Real> prompt{item.prompt};
        auto out = forward(params, cfg, channels.channels, t, prompt, item.plan);
        auto item_loss = mse(out, Tensor<Real>::from({t_frames, d}, std::move(target)));
        acc = acc.defined() ? add(acc, item_loss) : item_loss;
    }
    return scale(acc, Real(1.0 / double(batch.size())));
}

struct StepStats {
    double loss = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;
    int level = 0;
};

// One optimizer step: backprop the batch loss, decoupled weight decay,
// adaptive moments with bias correction, linear warmup, then the EMA update.
template <typename Real>
StepStats train_step(TrainState<Real>& state, const std::vector<TrainItem<Real>>& batch,
                     const TrainConfig& tc, const NoiseSchedule& sched) {
    tc.validate();
    const std::int64_t k = state.step + 1;
    Rng rng(derive_seed(tc.seed, "train-noise", std::uint64_t(k)));

    auto names = state.params.named();
    for (auto& [name, t] : names) t->zero_grad();
    auto loss = fm_loss(state.params, state.model, batch, sched, rng);
    const double loss_v = double(loss.item());
    if (!std::isfinite(loss_v))
        throw NumericError("non-finite loss at step " + std::to_string(k) + " (level " +
                           std::to_string(batch[0].level) + ", " +
                           std::to_string(batch.size()) + " items)");
    backward(loss);

    double grad_sq = 0.0;
    for (auto& [name, t] : names)
        for (Real g : t->grad()) grad_sq += double(g) * double(g);
    const double grad_norm = std::sqrt(grad_sq);
    if (!std::isfinite(grad_norm))
        throw NumericError("non-finite gradient at step " + std::to_string(k));

    const double lr = (tc.warmup_steps > 0 && k < tc.warmup_steps)
                          ? tc.learning_rate * double(k) / double(tc.warmup_steps)
                          : tc.learning_rate;
    const double bc1 = 1.0 - std::pow(tc.adam_beta1, double(k));
    const double bc2 = 1.0 - std::pow(tc.adam_beta2, double(k));

    auto ema_names = state.ema.named();
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto p = names[i].second->mutable_vals();
        const auto g = names[i].second->grad();
        auto e = ema_names[i].second->mutable_vals();
        auto& m = state.adam_m[i];
        auto& v = state.adam_v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = double(g[j]);
            const double mj = tc.adam_beta1 * double(m[j]) + (1.0 - tc.adam_beta1) * gj;
            const double vj = tc.adam_beta2 * double(v[j]) + (1.0 - tc.adam_beta2) * gj * gj;
            m[j] = Real(mj);
            v[j] = Real(vj);
            double pj = double(p[j]);
            pj -= lr * tc.weight_decay * pj;
            pj -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + tc.adam_eps);
            p[j] = Real(pj);
            e[j] = Real(tc.ema_decay * double(e[j]) + (1.0 - tc.ema_decay) * pj);
        }
    }
    state.step = k;
    return {loss_v, lr, grad_norm, batch[0].level};
}

// Loss without gradients, for probes and training-curve checks.
template <typename Real>
double eval_loss(const ModelParams<Real>& params, const ModelConfig& cfg,
                 const std::vector<TrainItem<Real>>& batch, const NoiseSchedule& sched,
                 std::uint64_t seed) {
    NoGradGuard ng;
    Rng rng(seed);
    return double(fm_loss(params, cfg, batch, sched, rng).item());
}

// Pre-rendered clips and prompts for the levels a stage will touch. Scenes
// whose duration a stride does not divide are re-rendered over the largest
// divisible prefix (counted in recropped).
template <typename Real>
struct DataCache {
    const Dataset* data = nullptr;
    std::vector<std::vector<VideoSequence>> renders;  // [scene][level], empty if unused
    std::vector<std::vector<Real>> prompts;
    int recropped = 0;

    static DataCache build(const Dataset& data, const ModelConfig& cfg,
                           const std::vector<int>& levels) {
        check_contract(!data.scenes.empty(), "empty dataset");
        const int max_level = *std::max_element(levels.begin(), levels.end());
        DataCache cache;
        cache.data = &data;
        cache.renders.resize(data.scenes.size());
        cache.prompts.resize(data.scenes.size());
        for (std::size_t s = 0; s < data.scenes.size(); ++s) {
            cache.renders[s].resize(std::size_t(max_level) + 1);
            for (int level : levels) {
                const int stride = 1 << level;
                SceneParams scene = data.scenes[s];
                if (scene.duration % stride != 0) {
                    scene = recrop_scene(scene, stride);
                    ++cache.recropped;
                }
                cache.renders[s][std::size_t(level)] =
                    render_scene_level(scene, data.frame_dim, level);
            }
            const auto p = prompt_of(data.scenes[s], cfg.cond_dim);
            cache.prompts[s].assign(p.begin(), p.end());
        }
        return cache;
    }

    // Largest stride-divisible prefix, dropping shots that fall past it.
    static SceneParams recrop_scene(SceneParams scene, int stride) {
        const int prefix = (scene.duration / stride) * stride;
        check_contract(prefix > 0, "clip shorter than one stride");
        scene.duration = prefix;
        while (!scene.boundaries.empty() && scene.boundaries.back() >= prefix) {
            scene.boundaries.pop_back();
            scene.shots.pop_back();
        }
        return scene;
    }
};

namespace detail {

// Shot layout of a cropped window in clip-slot space, derived from the
// scene's continuous-time shot assignment at each slot.
inline ShotLayout window_layout(const SceneParams& scene, const VideoSequence& seq, int offset,
                                int frames) {
    ShotLayout layout;
    layout.n_frames = frames;
    const ShotParams* prev = &scene.shot_at(seq.index_of(offset));
    for (int j = 1; j < frames; ++j) {
        const ShotParams* cur = &scene.shot_at(seq.index_of(offset + j));
        if (cur != prev) layout.boundaries.push_back(j);
        prev = cur;
    }
    return layout;
}

template <typename Real>
TrainItem<Real> crop_item(const DataCache<Real>& cache, int scene_idx, int level, int offset,
                          int frames) {
    const VideoSequence& seq = cache.renders[std::size_t(scene_idx)][std::size_t(level)];
    TrainItem<Real> item;
    item.frame_count = frames;
    item.frame_dim = seq.frame_dim;
    item.level = level;
    item.scene = scene_idx;
    item.prompt = cache.prompts[std::size_t(scene_idx)];
    item.frames.resize(std::size_t(frames) * seq.frame_dim);
    for (int j = 0; j < frames; ++j) {
        const float* row = seq.row(offset + j);
        for (int d = 0; d < seq.frame_dim; ++d)
            item.frames[std::size_t(j) * seq.frame_dim + d] = Real(row[d]);
    }
    return item;
}

template <typename Real>
MultiMaskCondition<Real> frames_as_condition(const TrainItem<Real>& item,
                                             const std::vector<int>& positions) {
    MultiMaskCondition<Real> cond;
    for (int pos : positions)
        cond.entries[pos] = std::vector<Real>(
            item.frames.begin() + std::int64_t(pos) * item.frame_dim,
            item.frames.begin() + std::int64_t(pos + 1) * item.frame_dim);
    return cond;
}

}  // namespace detail

template <typename Real>
std::vector<TrainItem<Real>> make_stage1_batch(const DataCache<Real>& cache, const TrainConfig& tc,
                                               std::int64_t step,
                                               double* max_cond_fraction = nullptr) {
    std::vector<TrainItem<Real>> batch;
    batch.reserve(std::size_t(tc.batch_size));
    const int n_scenes = int(cache.data->scenes.size());
    for (int b = 0; b < tc.batch_size; ++b) {
        Rng rng(derive_seed(tc.seed, "stage1-item", std::uint64_t(step), std::uint64_t(b)));
        const int scene_idx = int(rng.uniform_int(std::uint64_t(n_scenes)));
        const VideoSequence& seq = cache.renders[std::size_t(scene_idx)][0];
        const int frames = std::min(tc.clip_frames, seq.frames);
        const int offset = int(rng.uniform_int(std::uint64_t(seq.frames - frames + 1)));
        auto item = detail::crop_item(cache, scene_idx, 0, offset, frames);
        item.plan = assign_indices(frames, 0, seq.index_of(offset), tc.t_max);
        item.cond = sample_training_condition(item.frames, frames, item.frame_dim, rng,
                                              tc.cond_max_fraction);
        if (max_cond_fraction)
            *max_cond_fraction =
                std::max(*max_cond_fraction, double(item.cond.entries.size()) / frames);
        batch.push_back(std::move(item));
    }
    return batch;
}

// Stage-2 condition protocol: with probability .35 the stage-1 sparse random
// conditions, .45 an anchor grid (every 2nd or 4th slot, the pattern coarser
// levels hand to finer ones at sampling time), .20 a prefix (the continuation
// task). Multi-shot windows then drop all conditions inside a random shot
// subset half the time.
template <typename Real>
std::vector<TrainItem<Real>> make_stage2_batch(const DataCache<Real>& cache, const TrainConfig& tc,
                                               const std::vector<int>& levels, std::int64_t step) {
    Rng level_rng(derive_seed(tc.seed, "stage2-level", std::uint64_t(step)));
    const int level = levels[level_rng.uniform_int(std::uint64_t(levels.size()))];
    const int stride = 1 << level;
    const int n_scenes = int(cache.data->scenes.size());

    std::vector<TrainItem<Real>> batch;
    batch.reserve(std::size_t(tc.batch_size));
    for (int b = 0; b < tc.batch_size; ++b) {
        Rng rng(derive_seed(tc.seed, "stage2-item", std::uint64_t(step), std::uint64_t(b)));
        const int scene_idx = int(rng.uniform_int(std::uint64_t(n_scenes)));
        const VideoSequence& seq = cache.renders[std::size_t(scene_idx)][std::size_t(level)];
        const int frames = std::min(tc.clip_frames, seq.frames);
        const int offset = int(rng.uniform_int(std::uint64_t(seq.frames - frames + 1)));
        auto item = detail::crop_item(cache, scene_idx, level, offset, frames);

        const double span = double(frames - 1) * stride;
        check_config(tc.t_max > span, "t_max too small for a " + std::to_string(frames) +
                                          "-frame clip at stride " + std::to_string(stride));
        const double t_start = sample_t_start(tc.t_max - span, rng);
        item.plan = assign_indices(frames, level, t_start, tc.t_max);

        const double u = rng.uniform();
        if (u < 0.35) {
            item.cond = sample_training_condition(item.frames, frames, item.frame_dim, rng,
                                                  tc.cond_max_fraction);
        } else if (u < 0.80) {
            int r = (frames > 8 && rng.uniform() < 0.5) ? 4 : 2;
            std::vector<int> positions;
            for (int pos = r - 1; pos < frames; pos += r) positions.push_back(pos);
            item.cond = detail::frames_as_condition(item, positions);
        } else {
            const int prefix = 1 + int(rng.uniform_int(std::uint64_t(std::max(1, frames / 2))));
            std::vector<int> positions;
            for (int pos = 0; pos < prefix; ++pos) positions.push_back(pos);
            item.cond = detail::frames_as_condition(item, positions);
        }

        const auto layout = detail::window_layout(cache.data->scenes[std::size_t(scene_idx)], seq,
                                                  offset, frames);
        if (layout.shot_count() > 1 && rng.uniform() < 0.5)
            item.cond = drop_shot_conditions(item.cond, layout, rng);
        batch.push_back(std::move(item));
    }
    return batch;
}

struct TrainReport {
    double first_loss = 0.0;
    double last_loss = 0.0;
    std::vector<std::int64_t> level_counts;  // batches per level index
    double max_cond_fraction = 0.0;
    int recropped = 0;
    std::int64_t steps_run = 0;
};

namespace detail {

inline void log_csv(std::ofstream& csv, std::int64_t step, int stage, const StepStats& stats,
                    const std::vector<std::int64_t>& level_counts) {
    if (!csv.is_open()) return;
    std::string hist;
    for (std::size_t l = 0; l < level_counts.size(); ++l) {
        if (l) hist += '|';
        hist += std::to_string(l) + ':' + std::to_string(level_counts[l]);
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%lld,%d,%.9g,%.9g,%.9g,%s\n",
                  static_cast<long long>(step), stage, stats.loss, stats.lr, stats.grad_norm,
                  hist.c_str());
    csv << line;
}

inline std::ofstream open_csv(const std::string& path) {
    if (path.empty()) return {};
    const bool fresh = [&] {
        std::ifstream probe(path);
        return !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
    }();
    std::ofstream csv(path, std::ios::app);
    if (!csv) throw IoError("cannot open training log " + path);
    if (fresh) csv << "step,stage,loss,lr,grad_norm,level_hist\n";
    return csv;
}

}  // namespace detail

// Stage 1: full-rate clips, sparse random conditioning only.
template <typename Real>
TrainReport run_stage1(TrainState<Real>& state, const Dataset& data, TrainConfig tc,
                       const std::string& csv_path = "") {
    tc.stage = TrainStage::single_rate;
    tc.validate();
    check_config(state.stage == TrainStage::single_rate,
                 "stage-1 training requested on a stage-2 checkpoint");
    auto cache = DataCache<Real>::build(data, state.model, {0});
    auto csv = detail::open_csv(csv_path);
    NoiseSchedule sched;

    TrainReport report;
    report.level_counts.assign(1, 0);
    report.recropped = cache.recropped;
    for (std::int64_t k = state.step + 1; k <= tc.steps; ++k) {
        auto batch = make_stage1_batch(cache, tc, k, &report.max_cond_fraction);
        const auto stats = train_step(state, batch, tc, sched);
        report.level_counts[0] += 1;
        if (report.steps_run == 0) report.first_loss = stats.loss;
        report.last_loss = stats.loss;
        ++report.steps_run;
        detail::log_csv(csv, k, 1, stats, report.level_counts);
    }
    return report;
}

// Stage 2: uniform rate-level choice per batch, randomized temporal offsets,
// the extended condition protocol, and shot-conditioned dropping.
template <typename Real>
TrainReport run_stage2(TrainState<Real>& state, const Dataset& data, TrainConfig tc,
                       const std::string& csv_path = "") {
    tc.stage = TrainStage::multi_rate;
    tc.validate();
    const auto levels = tc.levels(data.base_fps);
    if (state.stage == TrainStage::single_rate) state.enter_stage(TrainStage::multi_rate);
    auto cache = DataCache<Real>::build(data, state.model, levels);
    auto csv = detail::open_csv(csv_path);
    NoiseSchedule sched;

    const int max_level = *std::max_element(levels.begin(), levels.end());
    TrainReport report;
    report.level_counts.assign(std::size_t(max_level) + 1, 0);
    report.recropped = cache.recropped;
    for (std::int64_t k = state.step + 1; k <= tc.steps; ++k) {
        auto batch = make_stage2_batch(cache, tc, levels, k);
        const auto stats = train_step(state, batch, tc, sched);
        report.level_counts[std::size_t(stats.level)] += 1;
        if (report.steps_run == 0) report.first_loss = stats.loss;
        report.last_loss = stats.loss;
        ++report.steps_run;
        detail::log_csv(csv, k, 2, stats, report.level_counts);
    }
    return report;
}

}  // namespace ratecast
