#include "ratecast/worldsim.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "ratecast/io.hpp"
#include "ratecast/rng.hpp"

namespace ratecast {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void SceneParams::validate() const {
    check_contract(!shots.empty(), "scene needs at least one shot");
    check_contract(duration > 0, "scene duration must be positive");
    check_contract(base_fps > 0.0, "scene base_fps must be positive");
    check_contract(boundaries.size() + 1 == shots.size(),
                   "scene has " + std::to_string(shots.size()) + " shots but " +
                       std::to_string(boundaries.size()) + " boundaries");
    layout().validate();
}

const ShotParams& SceneParams::shot_at(double tau) const {
    std::size_t s = 0;
    for (int b : boundaries)
        if (tau >= double(b)) ++s;
    return shots[std::min(s, shots.size() - 1)];
}

double scene_center(const SceneParams& scene, int frame_dim, double tau) {
    const ShotParams& p = scene.shot_at(tau);
    return (frame_dim - 1) * (0.5 + 0.35 * std::sin(kTwoPi * (p.freq * tau + p.phase)));
}

double scene_value(const SceneParams& scene, int frame_dim, int cell, double tau) {
    const ShotParams& p = scene.shot_at(tau);
    const double c = scene_center(scene, frame_dim, tau);
    const double dx = double(cell) - c;
    const double bump = p.amp * std::exp(-dx * dx / (2.0 * p.sigma * p.sigma));
    const double bg =
        p.bg_amp * std::sin(kTwoPi * p.bg_freq * tau + kTwoPi * double(cell) / frame_dim);
    return bump + bg;
}

VideoSequence render_scene(const SceneParams& scene, int frame_dim, int level, double t_start) {
    scene.validate();
    check_contract(frame_dim > 0, "frame_dim must be positive");
    check_contract(level >= 0, "level must be non-negative");
    const int stride = 1 << level;
    check_contract(scene.duration % stride == 0,
                   "duration " + std::to_string(scene.duration) + " is not divisible by stride " +
                       std::to_string(stride));
    VideoSequence seq;
    seq.frames = scene.duration / stride;
    seq.frame_dim = frame_dim;
    seq.level = level;
    seq.base_fps = scene.base_fps;
    seq.t_start = t_start;
    seq.data.resize(std::int64_t(seq.frames) * frame_dim);
    for (int j = 0; j < seq.frames; ++j) {
        const double tau = seq.index_of(j);
        float* row = seq.row(j);
        for (int d = 0; d < frame_dim; ++d) row[d] = float(scene_value(scene, frame_dim, d, tau));
    }
    return seq;
}

VideoSequence render_scene_level(const SceneParams& scene, int frame_dim, int level) {
    return render_scene(scene, frame_dim, level, canonical_t_start(level));
}

std::vector<double> prompt_of(const SceneParams& scene, int cond_dim) {
    scene.validate();
    check_config(cond_dim >= 8, "prompt encoding needs cond_dim >= 8, got " +
                                    std::to_string(cond_dim));
    const ShotParams& p = scene.shots[0];
    std::vector<double> v(cond_dim, 0.0);
    v[0] = (p.freq - 0.012) / 0.008;
    v[1] = std::sin(kTwoPi * p.phase);
    v[2] = std::cos(kTwoPi * p.phase);
    v[3] = (p.sigma - 1.85) / 0.65;
    v[4] = (p.amp - 1.0) / 0.2;
    v[5] = (p.bg_amp - 0.1) / 0.05;
    v[6] = (p.bg_freq - 0.03) / 0.02;
    return v;
}

namespace {

ShotParams random_shot(Rng& rng) {
    ShotParams p;
    p.freq = rng.uniform(0.004, 0.02);
    p.phase = rng.uniform(0.0, 1.0);
    p.sigma = rng.uniform(1.2, 2.5);
    p.amp = rng.uniform(0.8, 1.2);
    p.bg_amp = rng.uniform(0.05, 0.15);
    p.bg_freq = rng.uniform(0.01, 0.05);
    return p;
}

}  // namespace

Dataset make_dataset(int n_scenes, double multi_shot_fraction, int duration, int frame_dim,
                     std::uint64_t seed) {
    check_contract(n_scenes > 0, "dataset needs a positive scene count");
    check_contract(multi_shot_fraction >= 0.0 && multi_shot_fraction <= 1.0,
                   "multi-shot fraction outside [0, 1]");
    check_contract(duration >= 8, "scene duration must be at least 8 frames");
    Dataset ds;
    ds.frame_dim = frame_dim;
    for (int i = 0; i < n_scenes; ++i) {
        Rng rng(derive_seed(seed, "scene", i));
        SceneParams scene;
        scene.duration = duration;
        scene.shots.push_back(random_shot(rng));
        if (rng.uniform() < multi_shot_fraction) {
            // One boundary in the middle half so both shots have room.
            const int lo = duration / 4;
            const int hi = (3 * duration) / 4;
            scene.boundaries.push_back(lo + rng.uniform_int(hi - lo));
            scene.shots.push_back(random_shot(rng));
        }
        scene.validate();
        ds.scenes.push_back(std::move(scene));
    }
    return ds;
}

EvalReport evaluate(const VideoSequence& generated, const SceneParams& scene,
                    const std::vector<VideoSequence>& stage_outputs) {
    scene.validate();
    check_contract(generated.frames > 0 && generated.frame_dim > 0, "empty sequence");
    EvalReport report;
    const int t = generated.frames;
    const int d = generated.frame_dim;

    double gt_sum = 0.0, gt_sq = 0.0;
    report.per_frame_mse.resize(t);
    for (int j = 0; j < t; ++j) {
        const double tau = generated.index_of(j);
        double acc = 0.0;
        for (int c = 0; c < d; ++c) {
            const double truth = scene_value(scene, d, c, tau);
            const double err = double(generated.row(j)[c]) - truth;
            acc += err * err;
            gt_sum += truth;
            gt_sq += truth * truth;
        }
        report.per_frame_mse[j] = acc / d;
        report.mse += acc;
    }
    const double n = double(t) * d;
    report.mse /= n;
    report.signal_power = gt_sq / n;
    const double mean = gt_sum / n;
    report.signal_variance = gt_sq / n - mean * mean;
    report.mse_over_variance =
        report.signal_variance > 0 ? report.mse / report.signal_variance : 0.0;

    // Least-squares slope of per-frame MSE against the frame number.
    if (t > 1) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int j = 0; j < t; ++j) {
            sx += j;
            sy += report.per_frame_mse[j];
            sxx += double(j) * j;
            sxy += double(j) * report.per_frame_mse[j];
        }
        report.drift_slope = (t * sxy - sx * sy) / (t * sxx - sx * sx);
    }

    // Bitwise agreement between every pair of outputs at shared indices,
    // including the final sequence.
    std::vector<const VideoSequence*> all;
    for (const auto& s : stage_outputs) all.push_back(&s);
    all.push_back(&generated);
    for (std::size_t a = 0; a < all.size(); ++a) {
        for (std::size_t b = a + 1; b < all.size(); ++b) {
            const VideoSequence* coarse = all[a];
            const VideoSequence* fine = all[b];
            if (coarse->frame_dim != fine->frame_dim) continue;
            for (int j = 0; j < coarse->frames; ++j) {
                const double idx = coarse->index_of(j);
                const double rel = (idx - fine->t_start) / fine->stride();
                const int jj = int(std::llround(rel));
                if (jj < 0 || jj >= fine->frames || std::abs(rel - jj) > 1e-9) continue;
                for (int c = 0; c < coarse->frame_dim; ++c)
                    if (coarse->row(j)[c] != fine->row(jj)[c]) {
                        ++report.anchor_violations;
                        break;
                    }
            }
        }
    }
    return report;
}

// --- serialization ---------------------------------------------------------

void save_tmv(const std::string& path, const VideoSequence& seq) {
    BinWriter w;
    w.magic("TMV1");
    w.u32(1);
    w.u32(std::uint32_t(seq.frames));
    w.u32(std::uint32_t(seq.frame_dim));
    w.f32(float(seq.base_fps));
    w.u32(std::uint32_t(seq.level));
    w.f64(seq.t_start);
    w.f32_array(seq.data.data(), seq.data.size());
    write_file_bytes(path, w.bytes());
}

VideoSequence load_tmv(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    BinReader r(bytes);
    r.expect_magic("TMV1");
    const auto version = r.u32();
    if (version != 1) throw IoError("unsupported sequence version " + std::to_string(version));
    VideoSequence seq;
    seq.frames = int(r.u32());
    seq.frame_dim = int(r.u32());
    seq.base_fps = double(r.f32());
    seq.level = int(r.u32());
    seq.t_start = r.f64();
    check_contract(seq.frames > 0 && seq.frame_dim > 0, "sequence file with empty dimensions");
    seq.data.resize(std::int64_t(seq.frames) * seq.frame_dim);
    r.f32_array(seq.data.data(), seq.data.size());
    if (!r.at_end()) throw IoError("trailing bytes in sequence file");
    return seq;
}

void save_dataset(const std::string& path, const Dataset& ds) {
    BinWriter w;
    w.magic("TMD1");
    w.u32(1);
    w.u32(std::uint32_t(ds.scenes.size()));
    w.u32(std::uint32_t(ds.frame_dim));
    w.f64(ds.base_fps);
    for (const auto& scene : ds.scenes) {
        BinWriter rec;
        rec.u32(std::uint32_t(scene.shots.size()));
        rec.u32(std::uint32_t(scene.boundaries.size()));
        rec.u32(std::uint32_t(scene.duration));
        rec.f64(scene.base_fps);
        for (int b : scene.boundaries) rec.u32(std::uint32_t(b));
        for (const auto& s : scene.shots) {
            rec.f64(s.freq);
            rec.f64(s.phase);
            rec.f64(s.sigma);
            rec.f64(s.amp);
            rec.f64(s.bg_amp);
            rec.f64(s.bg_freq);
        }
        w.u32(std::uint32_t(rec.bytes().size()));
        w.raw(rec.bytes().data(), rec.bytes().size());
    }
    write_file_bytes(path, w.bytes());
}

Dataset load_dataset(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    BinReader r(bytes);
    r.expect_magic("TMD1");
    const auto version = r.u32();
    if (version != 1) throw IoError("unsupported dataset version " + std::to_string(version));
    Dataset ds;
    const auto n = r.u32();
    ds.frame_dim = int(r.u32());
    ds.base_fps = r.f64();
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto rec_len = r.u32();
        const auto start = r.position();
        SceneParams scene;
        const auto n_shots = r.u32();
        const auto n_bounds = r.u32();
        scene.duration = int(r.u32());
        scene.base_fps = r.f64();
        for (std::uint32_t b = 0; b < n_bounds; ++b) scene.boundaries.push_back(int(r.u32()));
        for (std::uint32_t s = 0; s < n_shots; ++s) {
            ShotParams sp;
            sp.freq = r.f64();
            sp.phase = r.f64();
            sp.sigma = r.f64();
            sp.amp = r.f64();
            sp.bg_amp = r.f64();
            sp.bg_freq = r.f64();
            scene.shots.push_back(sp);
        }
        if (r.position() - start != rec_len) throw IoError("scene record length mismatch");
        scene.validate();
        ds.scenes.push_back(std::move(scene));
    }
    if (!r.at_end()) throw IoError("trailing bytes in dataset file");
    return ds;
}

namespace {

nlohmann::json scene_json(const SceneParams& scene) {
    nlohmann::json j;
    j["duration"] = scene.duration;
    j["base_fps"] = scene.base_fps;
    j["boundaries"] = scene.boundaries;
    j["shots"] = nlohmann::json::array();
    for (const auto& s : scene.shots)
        j["shots"].push_back({{"freq", s.freq},
                              {"phase", s.phase},
                              {"sigma", s.sigma},
                              {"amp", s.amp},
                              {"bg_amp", s.bg_amp},
                              {"bg_freq", s.bg_freq}});
    return j;
}

SceneParams scene_from(const nlohmann::json& j) {
    SceneParams scene;
    scene.duration = j.at("duration").get<int>();
    scene.base_fps = j.value("base_fps", 24.0);
    scene.boundaries = j.value("boundaries", std::vector<int>{});
    for (const auto& s : j.at("shots")) {
        ShotParams sp;
        sp.freq = s.at("freq").get<double>();
        sp.phase = s.at("phase").get<double>();
        sp.sigma = s.at("sigma").get<double>();
        sp.amp = s.at("amp").get<double>();
        sp.bg_amp = s.at("bg_amp").get<double>();
        sp.bg_freq = s.at("bg_freq").get<double>();
        scene.shots.push_back(sp);
    }
    scene.validate();
    return scene;
}

}  // namespace

std::string scene_to_json(const SceneParams& scene) { return scene_json(scene).dump(2); }

SceneParams scene_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("scene json: ") + e.what(), e.byte);
    }
    // A bare scene object or an array of scenes (first entry).
    if (j.is_array()) {
        check_contract(!j.empty(), "scene json array is empty");
        return scene_from(j[0]);
    }
    return scene_from(j);
}

std::string dataset_scenes_json(const Dataset& ds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& scene : ds.scenes) arr.push_back(scene_json(scene));
    return arr.dump(2);
}

}  // namespace ratecast
