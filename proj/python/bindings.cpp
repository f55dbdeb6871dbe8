// Python bindings for the ratecast core: dataset synthesis, the two-stage
// trainer, coarse-to-fine generation and the cost model.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ratecast/checkpoint.hpp"
#include "ratecast/scheduler.hpp"
#include "ratecast/trainer.hpp"
#include "ratecast/verify.hpp"
#include "ratecast/worldsim.hpp"

namespace py = pybind11;
using namespace ratecast;

namespace {

py::array_t<float> sequence_array(const VideoSequence& s) {
    py::array_t<float> a({s.frames, s.frame_dim});
    std::copy(s.data.begin(), s.data.end(), a.mutable_data());
    return a;
}

VideoSequence sequence_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> a,
                                  int level, double base_fps, double t_start) {
    check_contract(a.ndim() == 2, "frame array must be 2-d (frames x cells)");
    VideoSequence s;
    s.frames = int(a.shape(0));
    s.frame_dim = int(a.shape(1));
    s.level = level;
    s.base_fps = float(base_fps);
    s.t_start = t_start;
    s.data.assign(a.data(), a.data() + std::size_t(s.frames) * s.frame_dim);
    return s;
}

std::vector<float> prompt_from(py::object prompt, int cond_dim) {
    std::vector<float> out(std::size_t(cond_dim), 0.0f);
    if (prompt.is_none()) return out;
    auto vals = prompt.cast<std::vector<double>>();
    check_dim(int(vals.size()) == cond_dim,
              "prompt needs exactly " + std::to_string(cond_dim) + " values");
    for (std::size_t i = 0; i < vals.size(); ++i) out[i] = float(vals[i]);
    return out;
}

MultiMaskCondition<float> conditions_from(const std::map<int, std::vector<double>>& given) {
    MultiMaskCondition<float> cond;
    for (const auto& [pos, row] : given)
        cond.entries[pos] = std::vector<float>(row.begin(), row.end());
    return cond;
}

const ModelParams<float>& pick_weights(const TrainState<float>& st, bool use_ema) {
    return use_ema ? st.ema : st.params;
}

}  // namespace

PYBIND11_MODULE(_ratecast, m) {
    m.doc() = "coarse-to-fine video generation across frame-rate levels";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<PlanError>(m, "PlanError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // --- world -----------------------------------------------------------
    py::class_<ShotParams>(m, "ShotParams")
        .def(py::init<>())
        .def_readwrite("freq", &ShotParams::freq)
        .def_readwrite("phase", &ShotParams::phase)
        .def_readwrite("sigma", &ShotParams::sigma)
        .def_readwrite("amp", &ShotParams::amp)
        .def_readwrite("bg_amp", &ShotParams::bg_amp)
        .def_readwrite("bg_freq", &ShotParams::bg_freq);

    py::class_<SceneParams>(m, "SceneParams")
        .def(py::init<>())
        .def_readwrite("shots", &SceneParams::shots)
        .def_readwrite("boundaries", &SceneParams::boundaries)
        .def_readwrite("duration", &SceneParams::duration)
        .def_readwrite("base_fps", &SceneParams::base_fps)
        .def("validate", &SceneParams::validate)
        .def("to_json", [](const SceneParams& s) { return scene_to_json(s); })
        .def_static("from_json", [](const std::string& text) { return scene_from_json(text); });

    py::class_<VideoSequence>(m, "VideoSequence")
        .def(py::init(&sequence_from_array), py::arg("frames"), py::arg("level") = 0,
             py::arg("base_fps") = 24.0, py::arg("t_start") = 0.0)
        .def_readonly("frames", &VideoSequence::frames)
        .def_readonly("frame_dim", &VideoSequence::frame_dim)
        .def_readonly("level", &VideoSequence::level)
        .def_readonly("base_fps", &VideoSequence::base_fps)
        .def_readonly("t_start", &VideoSequence::t_start)
        .def("stride", &VideoSequence::stride)
        .def("index_of", &VideoSequence::index_of, py::arg("j"))
        .def("array", &sequence_array)
        .def("save",
             [](const VideoSequence& seq, const std::string& path) { save_tmv(path, seq); },
             py::arg("path"))
        .def_static("load", &load_tmv, py::arg("path"));

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("frame_dim", &Dataset::frame_dim)
        .def_readonly("base_fps", &Dataset::base_fps)
        .def_readonly("scenes", &Dataset::scenes)
        .def("save",
             [](const Dataset& ds, const std::string& path) { save_dataset(path, ds); },
             py::arg("path"))
        .def_static("load", &load_dataset, py::arg("path"))
        .def("scenes_json", &dataset_scenes_json);

    m.def("make_dataset", &make_dataset, py::arg("n_scenes"), py::arg("multi_shot") = 0.15,
          py::arg("duration") = 64, py::arg("frame_dim") = 16, py::arg("seed") = 0);
    m.def("render_scene", &render_scene, py::arg("scene"), py::arg("frame_dim"),
          py::arg("level"), py::arg("t_start"));
    m.def("render_scene_level", &render_scene_level, py::arg("scene"), py::arg("frame_dim"),
          py::arg("level"));
    m.def("prompt_of", &prompt_of, py::arg("scene"), py::arg("cond_dim"));
    m.def("canonical_t_start", &canonical_t_start, py::arg("level"));
    m.def("subsample_indices", &subsample_indices, py::arg("total_frames"), py::arg("level"),
          "1-based full-rate positions kept by the given rate level");

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("mse", &EvalReport::mse)
        .def_readonly("signal_variance", &EvalReport::signal_variance)
        .def_readonly("signal_power", &EvalReport::signal_power)
        .def_readonly("mse_over_variance", &EvalReport::mse_over_variance)
        .def_readonly("drift_slope", &EvalReport::drift_slope)
        .def_readonly("per_frame_mse", &EvalReport::per_frame_mse)
        .def_readonly("anchor_violations", &EvalReport::anchor_violations);

    m.def("evaluate", &evaluate, py::arg("generated"), py::arg("scene"),
          py::arg("stage_outputs") = std::vector<VideoSequence>{});

    // --- model and trainer -------------------------------------------------
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("frame_dim", &ModelConfig::frame_dim)
        .def_readwrite("width", &ModelConfig::width)
        .def_readwrite("layers", &ModelConfig::layers)
        .def_readwrite("heads", &ModelConfig::heads)
        .def_readwrite("cond_dim", &ModelConfig::cond_dim)
        .def_readwrite("max_t", &ModelConfig::max_t)
        .def_readwrite("rope_theta", &ModelConfig::rope_theta)
        .def("validate", &ModelConfig::validate)
        .def("hash", [](const ModelConfig& c) { return model_config_hash(c); });

    py::enum_<TrainStage>(m, "TrainStage")
        .value("single_rate", TrainStage::single_rate)
        .value("multi_rate", TrainStage::multi_rate);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("stage", &TrainConfig::stage)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("warmup_steps", &TrainConfig::warmup_steps)
        .def_readwrite("ema_decay", &TrainConfig::ema_decay)
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("rate_fps", &TrainConfig::rate_fps)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("t_max", &TrainConfig::t_max)
        .def_readwrite("clip_frames", &TrainConfig::clip_frames)
        .def_readwrite("cond_max_fraction", &TrainConfig::cond_max_fraction)
        .def("validate", &TrainConfig::validate);

    py::class_<TrainReport>(m, "TrainReport")
        .def_readonly("first_loss", &TrainReport::first_loss)
        .def_readonly("last_loss", &TrainReport::last_loss)
        .def_readonly("level_counts", &TrainReport::level_counts)
        .def_readonly("max_cond_fraction", &TrainReport::max_cond_fraction)
        .def_readonly("recropped", &TrainReport::recropped)
        .def_readonly("steps_run", &TrainReport::steps_run);

    py::class_<TrainState<float>>(m, "TrainState")
        .def_static("fresh", &TrainState<float>::fresh, py::arg("config"), py::arg("seed"))
        .def_readonly("model", &TrainState<float>::model)
        .def_readonly("stage", &TrainState<float>::stage)
        .def_readonly("step", &TrainState<float>::step)
        .def_readonly("seed", &TrainState<float>::seed)
        .def("save", [](const TrainState<float>& st, const std::string& path) {
            save_checkpoint(path, st);
        })
        .def_static("load", [](const std::string& path) { return load_checkpoint<float>(path); });

    m.def(
        "run_stage1",
        [](TrainState<float>& st, const Dataset& data, const TrainConfig& tc,
           const std::string& csv) { return run_stage1(st, data, tc, csv); },
        py::arg("state"), py::arg("data"), py::arg("config"), py::arg("csv_path") = "",
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "run_stage2",
        [](TrainState<float>& st, const Dataset& data, const TrainConfig& tc,
           const std::string& csv) { return run_stage2(st, data, tc, csv); },
        py::arg("state"), py::arg("data"), py::arg("config"), py::arg("csv_path") = "",
        py::call_guard<py::gil_scoped_release>());

    // --- sampler and cost model ---------------------------------------------
    py::class_<ParallelConfig>(m, "ParallelConfig")
        .def_readonly("stage_fps", &ParallelConfig::stage_fps)
        .def_readonly("stage_segments", &ParallelConfig::stage_segments)
        .def_readonly("stage_steps", &ParallelConfig::stage_steps)
        .def_readwrite("analytic_w", &ParallelConfig::analytic_w)
        .def("stages", &ParallelConfig::stages)
        .def("levels", &ParallelConfig::levels);

    m.def("parse_config", &parse_config, py::arg("text"));

    m.def(
        "generate",
        [](const TrainState<float>& st, const std::string& config, py::object prompt,
           int frames, std::uint64_t seed, int workers,
           const std::map<int, std::vector<double>>& conditions, bool emit_stages,
           bool use_ema) {
            const ParallelConfig par = parse_config(config);
            const auto pv = prompt_from(prompt, st.model.cond_dim);
            const auto cond = conditions_from(conditions);
            GenerateOptions opt;
            opt.workers = workers;
            std::vector<VideoSequence> stages;
            GenerateStats stats;
            VideoSequence out;
            {
                py::gil_scoped_release release;
                out = generate(pick_weights(st, use_ema), st.model, par, pv, cond, frames, seed,
                               opt, emit_stages ? &stages : nullptr, &stats);
            }
            py::dict info;
            info["flops"] = stats.flops;
            info["peak_concurrency"] = stats.peak_concurrency;
            return py::make_tuple(out, stages, info);
        },
        py::arg("state"), py::arg("config"), py::arg("prompt") = py::none(),
        py::arg("frames") = 64, py::arg("seed") = 0, py::arg("workers") = 1,
        py::arg("conditions") = std::map<int, std::vector<double>>{},
        py::arg("emit_stages") = false, py::arg("use_ema") = true);

    m.def(
        "continue_video",
        [](const TrainState<float>& st, const std::string& config, py::object prompt,
           const VideoSequence& previous, int overlap, int n_new, std::uint64_t seed,
           int workers, bool use_ema) {
            const ParallelConfig par = parse_config(config);
            const auto pv = prompt_from(prompt, st.model.cond_dim);
            GenerateOptions opt;
            opt.workers = workers;
            py::gil_scoped_release release;
            return continue_video(pick_weights(st, use_ema), st.model, par, pv, previous,
                                  overlap, n_new, seed, opt);
        },
        py::arg("state"), py::arg("config"), py::arg("prompt"), py::arg("previous"),
        py::arg("overlap"), py::arg("n_new"), py::arg("seed") = 0, py::arg("workers") = 1,
        py::arg("use_ema") = true);

    py::class_<FlopStage>(m, "FlopStage")
        .def_readonly("stage", &FlopStage::stage)
        .def_readonly("nodes", &FlopStage::nodes)
        .def_readonly("frames_per_node", &FlopStage::frames_per_node)
        .def_readonly("steps", &FlopStage::steps)
        .def_readonly("flops", &FlopStage::flops);

    py::class_<FlopReport>(m, "FlopReport")
        .def_readonly("config", &FlopReport::config)
        .def_readonly("total_frames", &FlopReport::total_frames)
        .def_readonly("stages", &FlopReport::stages)
        .def_readonly("total", &FlopReport::total)
        .def_readonly("analytic", &FlopReport::analytic)
        .def("to_csv", &FlopReport::to_csv);

    m.def(
        "flop_count",
        [](const ModelConfig& cfg, const std::string& config, int frames) {
            FlopReport r = flop_count(cfg, parse_config(config), frames);
            r.config = config;
            return r;
        },
        py::arg("model"), py::arg("config"), py::arg("frames"));
    m.def("flops_forward", &flops_forward, py::arg("model"), py::arg("frames"));
    m.def("analytic_bound", &analytic_bound, py::arg("n_frames"), py::arg("k_stages"),
          py::arg("w_branch"), py::arg("intra_parallel") = false);

    // --- schedule utilities -------------------------------------------------
    m.def("sigma_shift_map", &sigma_shift_map, py::arg("u"), py::arg("sigma"));
    m.def("logit_normal_pdf", &logit_normal_pdf, py::arg("t"), py::arg("m") = 0.0,
          py::arg("s") = 1.0);
    m.def("time_grid", &time_grid, py::arg("steps"), py::arg("sigma") = 3.0);
    m.def("derive_seed", [](std::uint64_t root, const std::string& tag) {
        return derive_seed(root, tag);
    });

    m.def("verify", [](const std::string& suite) {
        py::list out;
        for (const auto& r : run_verify_suites(suite))
            out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
    }, py::arg("suite") = "all");

    m.attr("__version__") = "0.1.0";
}
