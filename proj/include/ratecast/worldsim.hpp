#pragma once

// Synthetic video world with a closed-form ground truth: each frame is a
// D-cell strip holding a Gaussian bump whose center follows a sinusoidal
// trajectory, over a low-amplitude harmonic background. Content is an exact
// function of continuous time, so subsampled renders agree with full-rate
// renders bit for bit and evaluation can query the truth at any instant.

#include <cstdint>
#include <string>
#include <vector>

#include "ratecast/multimask.hpp"

namespace ratecast {

struct ShotParams {
    double freq = 0.01;    // bump trajectory, cycles per frame
    double phase = 0.0;    // trajectory phase, cycles
    double sigma = 1.8;    // bump width, cells
    double amp = 1.0;      // bump amplitude
    double bg_amp = 0.1;   // background amplitude
    double bg_freq = 0.03; // background, cycles per frame
};

struct SceneParams {
    std::vector<ShotParams> shots;  // one per shot, at least one
    std::vector<int> boundaries;    // 0-based positions where a new shot begins
    int duration = 64;              // full-rate frames
    double base_fps = 24.0;

    void validate() const;
    ShotLayout layout() const { return ShotLayout{duration, boundaries}; }
    const ShotParams& shot_at(double tau) const;
};

// Analytic bump center (in cells) at continuous time tau.
double scene_center(const SceneParams& scene, int frame_dim, double tau);
// Ground-truth value of one cell at continuous time tau.
double scene_value(const SceneParams& scene, int frame_dim, int cell, double tau);

// A frame block tied to a rate level. t_start is the temporal index of frame
// j = 0; frame j sits at index t_start + j * 2^level, and indices double as
// content time.
struct VideoSequence {
    int frames = 0;
    int frame_dim = 0;
    int level = 0;
    double base_fps = 24.0;
    double t_start = 0.0;
    std::vector<float> data;  // frames x frame_dim, row-major

    int stride() const { return 1 << level; }
    double index_of(int j) const { return t_start + double(j) * stride(); }
    const float* row(int j) const { return data.data() + std::int64_t(j) * frame_dim; }
    float* row(int j) { return data.data() + std::int64_t(j) * frame_dim; }
};

// Canonical index of the first level-L frame of a clip: level positions are
// 1-based multiples of the stride, and index = position - 1.
inline double canonical_t_start(int level) { return double((1 << level) - 1); }

// Samples the scene at indices t_start + j * 2^level for
// j = 0 .. duration / 2^level - 1.
VideoSequence render_scene(const SceneParams& scene, int frame_dim, int level, double t_start);

// Render at the canonical grid, where frame content lines up with the
// positions subsample_indices reports.
VideoSequence render_scene_level(const SceneParams& scene, int frame_dim, int level);

// Prompt encoding of shot 0, normalized to roughly [-1, 1]. Needs
// cond_dim >= 8; extra slots are zero.
std::vector<double> prompt_of(const SceneParams& scene, int cond_dim);

struct Dataset {
    int frame_dim = 16;
    double base_fps = 24.0;
    std::vector<SceneParams> scenes;
};

// n_scenes scenes of the given duration; each is multi-shot with the given
// probability (one boundary, two parameter sets). Fully determined by seed.
Dataset make_dataset(int n_scenes, double multi_shot_fraction, int duration, int frame_dim,
                     std::uint64_t seed);

struct EvalReport {
    double mse = 0.0;               // mean over frames and cells
    double signal_variance = 0.0;   // ground-truth variance over frames and cells
    double signal_power = 0.0;      // ground-truth mean square
    double mse_over_variance = 0.0;
    double drift_slope = 0.0;       // least-squares slope of per-frame MSE vs frame
    std::vector<double> per_frame_mse;
    std::int64_t anchor_violations = 0;
};

// Compares a sequence against the analytic truth at its own index grid.
// stage_outputs, when given (coarsest first), are cross-checked for bitwise
// agreement at shared indices; disagreements count as anchor violations.
EvalReport evaluate(const VideoSequence& generated, const SceneParams& scene,
                    const std::vector<VideoSequence>& stage_outputs = {});

// --- serialization ---------------------------------------------------------

// Sequence file: "TMV1", u32 version, u32 T, u32 D, f32 base_fps, u32 level,
// f64 t_start, then T*D little-endian f32 values.
void save_tmv(const std::string& path, const VideoSequence& seq);
VideoSequence load_tmv(const std::string& path);

// Dataset file: "TMD1", u32 version, u32 n_scenes, u32 frame_dim,
// f64 base_fps, then length-prefixed scene records.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

std::string scene_to_json(const SceneParams& scene);
SceneParams scene_from_json(const std::string& text);
std::string dataset_scenes_json(const Dataset& ds);

}  // namespace ratecast
