// ratecast command-line front end: dataset creation, two-stage training,
// hierarchical generation, FLOP reporting, evaluation and self-verification.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ratecast/checkpoint.hpp"
#include "ratecast/manifest.hpp"
#include "ratecast/scheduler.hpp"
#include "ratecast/trainer.hpp"
#include "ratecast/verify.hpp"
#include "ratecast/worldsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ratecast;

namespace {

// Model dimensions shared by train / generate / flops.
struct ModelFlags {
    int frame_dim = 16;
    int width = 64;
    int layers = 4;
    int heads = 4;
    int cond_dim = 8;
    int max_t = 256;

    std::vector<CLI::Option*> opts;

    void attach(CLI::App* cmd) {
        opts = {cmd->add_option("--frame-dim", frame_dim, "channels per frame"),
                cmd->add_option("--width", width, "transformer width"),
                cmd->add_option("--layers", layers, "transformer blocks"),
                cmd->add_option("--heads", heads, "attention heads"),
                cmd->add_option("--cond-dim", cond_dim, "prompt vector length"),
                cmd->add_option("--max-t", max_t, "largest frame count per forward pass")};
    }

    bool any_given() const {
        for (const CLI::Option* opt : opts)
            if (opt->count() > 0) return true;
        return false;
    }

    ModelConfig config() const {
        ModelConfig cfg;
        cfg.frame_dim = frame_dim;
        cfg.width = width;
        cfg.layers = layers;
        cfg.heads = heads;
        cfg.cond_dim = cond_dim;
        cfg.max_t = max_t;
        return cfg;
    }

    json to_json() const {
        return json{{"frame_dim", frame_dim}, {"width", width},     {"layers", layers},
                    {"heads", heads},         {"cond_dim", cond_dim}, {"max_t", max_t}};
    }
};

std::string path_under(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

// ---------------------------------------------------------------------------
// dataset

struct DatasetArgs {
    int scenes = 200;
    double multi_shot = 0.15;
    int duration = 64;
    int frame_dim = 16;
    std::uint64_t seed = 0;
    std::string out = ".";
};

int cmd_dataset(const DatasetArgs& a, const std::string& argv_line) {
    ensure_dir(a.out);
    const Dataset ds = make_dataset(a.scenes, a.multi_shot, a.duration, a.frame_dim, a.seed);

    const std::string tmd = path_under(a.out, "dataset.tmd");
    const std::string scenes_json = path_under(a.out, "scenes.json");
    save_dataset(tmd, ds);
    const std::string text = dataset_scenes_json(ds);
    write_file_bytes(scenes_json, std::vector<std::uint8_t>(text.begin(), text.end()));

    RunManifest man("dataset");
    man.set_config(json{{"scenes", a.scenes},
                        {"multi_shot", a.multi_shot},
                        {"duration", a.duration},
                        {"frame_dim", a.frame_dim},
                        {"seed", a.seed},
                        {"out", a.out},
                        {"argv", argv_line}});
    man.set_seed(a.seed);
    man.add_output(tmd);
    man.add_output(scenes_json);
    man.write(path_under(a.out, "manifest.json"));

    std::printf("wrote %d scenes (%d frames x %d cells each) to %s\n", a.scenes, a.duration,
                a.frame_dim, tmd.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    int stage = 1;
    std::string data;
    int steps = 2000;
    int batch = 32;
    double lr = -1.0;  // sentinel: 5e-4 for stage 1, 2e-5 for stage 2
    int warmup = 2000;
    double weight_decay = 1e-4;
    double ema = 0.999;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double t_max = kDefaultTMax;
    int clip_frames = 24;
    double cond_max = 0.15;
    std::vector<double> rates = {6.0, 12.0, 24.0};
    std::string init;
    std::string resume;
    std::string out = ".";
    int ckpt_every = 0;  // 0: final checkpoint only
    ModelFlags model;
};

void merge_report(TrainReport& total, const TrainReport& chunk) {
    if (total.steps_run == 0) total.first_loss = chunk.first_loss;
    if (chunk.steps_run > 0) total.last_loss = chunk.last_loss;
    if (total.level_counts.size() < chunk.level_counts.size())
        total.level_counts.resize(chunk.level_counts.size(), 0);
    for (std::size_t i = 0; i < chunk.level_counts.size(); ++i)
        total.level_counts[i] += chunk.level_counts[i];
    total.max_cond_fraction = std::max(total.max_cond_fraction, chunk.max_cond_fraction);
    total.recropped = std::max(total.recropped, chunk.recropped);
    total.steps_run += chunk.steps_run;
}

int cmd_train(const TrainArgs& a, const std::string& argv_line) {
    if (a.stage == 2 && a.init.empty() && a.resume.empty()) {
        std::fprintf(stderr,
                     "error: --stage 2 requires --init <stage-1 checkpoint> or --resume\n");
        return 2;
    }
    ensure_dir(a.out);

    TrainState<float> state;
    ModelConfig cfg;
    const std::string loaded_from = !a.resume.empty() ? a.resume : a.init;
    if (!loaded_from.empty()) {
        // The checkpoint is the source of truth for model dimensions; explicit
        // flags are only cross-checked against it.
        state = load_checkpoint<float>(loaded_from);
        cfg = state.model;
        if (a.model.any_given()) {
            const ModelConfig requested = a.model.config();
            requested.validate();
            if (model_config_hash(requested) != model_config_hash(cfg)) {
                std::fprintf(stderr,
                             "error: checkpoint %s is incompatible with the requested model\n"
                             "  checkpoint config hash: %s\n"
                             "  requested  config hash: %s\n",
                             loaded_from.c_str(), model_config_hash(cfg).c_str(),
                             model_config_hash(requested).c_str());
                return 1;
            }
        }
    } else {
        cfg = a.model.config();
        cfg.validate();
        state = TrainState<float>::fresh(cfg, a.seed);
    }
    const std::string want_hash = model_config_hash(cfg);

    TrainConfig tc;
    tc.stage = a.stage == 1 ? TrainStage::single_rate : TrainStage::multi_rate;
    tc.learning_rate = a.lr >= 0.0 ? a.lr : (a.stage == 1 ? 5e-4 : 2e-5);
    tc.weight_decay = a.weight_decay;
    tc.batch_size = a.batch;
    tc.warmup_steps = a.warmup;
    tc.ema_decay = a.ema;
    tc.steps = a.steps;
    tc.rate_fps = a.rates;
    tc.seed = a.seed_given || loaded_from.empty() ? a.seed : state.seed;
    tc.t_max = a.t_max;
    tc.clip_frames = a.clip_frames;
    tc.cond_max_fraction = a.cond_max;
    tc.validate();

    const Dataset data = load_dataset(a.data);
    const std::string csv_path = path_under(a.out, "train_log.csv");
    const std::string final_ckpt =
        path_under(a.out, "ckpt_stage" + std::to_string(a.stage) + ".tmck");

    // Stage transition happens once, up front, so that checkpoint chunking
    // below sees a stable step counter.
    if (a.stage == 2 && state.stage == TrainStage::single_rate)
        state.enter_stage(TrainStage::multi_rate);

    TrainReport report;
    std::vector<std::string> extra_ckpts;
    while (state.step < tc.steps) {
        std::int64_t target = tc.steps;
        if (a.ckpt_every > 0)
            target = std::min<std::int64_t>(tc.steps, state.step + a.ckpt_every);
        TrainConfig chunk = tc;
        chunk.steps = int(target);
        const TrainReport r = a.stage == 1 ? run_stage1(state, data, chunk, csv_path)
                                           : run_stage2(state, data, chunk, csv_path);
        merge_report(report, r);
        if (state.step < tc.steps) {
            const std::string snap = path_under(
                a.out, "ckpt_stage" + std::to_string(a.stage) + "_step" +
                           std::to_string(state.step) + ".tmck");
            save_checkpoint(snap, state);
            extra_ckpts.push_back(snap);
        }
    }
    save_checkpoint(final_ckpt, state);

    RunManifest man("train");
    man.set_config(json{{"stage", a.stage},
                        {"data", a.data},
                        {"steps", a.steps},
                        {"batch", a.batch},
                        {"lr", tc.learning_rate},
                        {"warmup", a.warmup},
                        {"weight_decay", a.weight_decay},
                        {"ema", a.ema},
                        {"seed", tc.seed},
                        {"t_max", a.t_max},
                        {"clip_frames", a.clip_frames},
                        {"cond_max", a.cond_max},
                        {"rates", a.rates},
                        {"init", a.init},
                        {"resume", a.resume},
                        {"ckpt_every", a.ckpt_every},
                        {"model", json{{"frame_dim", cfg.frame_dim},
                                       {"width", cfg.width},
                                       {"layers", cfg.layers},
                                       {"heads", cfg.heads},
                                       {"cond_dim", cfg.cond_dim},
                                       {"max_t", cfg.max_t}}},
                        {"model_hash", want_hash},
                        {"out", a.out},
                        {"argv", argv_line}});
    man.set_seed(tc.seed);
    man.add_input(a.data);
    if (!loaded_from.empty()) man.add_input(loaded_from);
    man.add_output(final_ckpt);
    for (const auto& p : extra_ckpts) man.add_output(p);
    man.add_output(csv_path);
    man.write(path_under(a.out, "manifest.json"));

    std::string hist;
    for (std::size_t i = 0; i < report.level_counts.size(); ++i) {
        if (i) hist += ' ';
        hist += "level" + std::to_string(i) + "=" + std::to_string(report.level_counts[i]);
    }
    std::printf("stage %d: %lld steps, loss %.6g -> %.6g (%s)\n", a.stage,
                static_cast<long long>(report.steps_run), report.first_loss, report.last_loss,
                hist.c_str());
    if (report.recropped > 0)
        std::printf("note: %d scene(s) re-cropped to a stride-divisible prefix\n",
                    report.recropped);
    std::printf("checkpoint: %s\n", final_ckpt.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
    std::string ckpt;
    std::string config = "f(6,12,24)m(1,2,4)";
    int frames = 64;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out = ".";
    bool emit_stages = false;
    std::string scene;
    std::vector<double> prompt;
    std::string image;
    std::string first_last;
    std::string cont;
    int overlap = 0;
    bool raw_weights = false;
};

int cmd_generate(const GenerateArgs& a, const std::string& argv_line) {
    ensure_dir(a.out);
    const ParallelConfig par = parse_config(a.config);
    const TrainState<float> state = load_checkpoint<float>(a.ckpt);
    const ModelConfig& cfg = state.model;
    const ModelParams<float>& weights = a.raw_weights ? state.params : state.ema;

    std::vector<float> prompt(std::size_t(cfg.cond_dim), 0.0f);
    if (!a.scene.empty()) {
        const auto bytes = read_file_bytes(a.scene);
        const SceneParams sc = scene_from_json(std::string(bytes.begin(), bytes.end()));
        const auto p = prompt_of(sc, cfg.cond_dim);
        for (std::size_t i = 0; i < p.size(); ++i) prompt[i] = float(p[i]);
    } else if (!a.prompt.empty()) {
        check_dim(int(a.prompt.size()) == cfg.cond_dim,
                  "--prompt needs exactly " + std::to_string(cfg.cond_dim) + " values");
        for (std::size_t i = 0; i < a.prompt.size(); ++i) prompt[i] = float(a.prompt[i]);
    }

    GenerateOptions opt;
    opt.workers = a.workers;

    RunManifest man("generate");
    man.add_input(a.ckpt);
    if (!a.scene.empty()) man.add_input(a.scene);

    VideoSequence result;
    std::vector<VideoSequence> stages;
    GenerateStats stats;
    if (!a.cont.empty()) {
        const VideoSequence prev = load_tmv(a.cont);
        man.add_input(a.cont);
        result = continue_video(weights, cfg, par, prompt, prev, a.overlap, a.frames, a.seed,

                                opt);
    } else {
        MultiMaskCondition<float> cond;
        if (!a.image.empty()) {
            const VideoSequence img = load_tmv(a.image);
            check_dim(img.frame_dim == cfg.frame_dim, "--image frame dim mismatch with model");
            check_contract(img.frames >= 1, "--image file holds no frames");
            cond.entries[0] = std::vector<float>(img.row(0), img.row(0) + img.frame_dim);
            man.add_input(a.image);
        } else if (!a.first_last.empty()) {
            const VideoSequence fl = load_tmv(a.first_last);
            check_dim(fl.frame_dim == cfg.frame_dim,
                      "--first-last frame dim mismatch with model");
            check_contract(fl.frames >= 2, "--first-last needs at least two frames");
            cond.entries[0] = std::vector<float>(fl.row(0), fl.row(0) + fl.frame_dim);
            cond.entries[a.frames - 1] =
                std::vector<float>(fl.row(fl.frames - 1), fl.row(fl.frames - 1) + fl.frame_dim);
            man.add_input(a.first_last);
        }
        result = generate(weights, cfg, par, prompt, cond, a.frames, a.seed, opt,
                          a.emit_stages ? &stages : nullptr, &stats);
        std::fprintf(stderr, "flops=%llu peak_concurrency=%d\n",
                     static_cast<unsigned long long>(stats.flops), stats.peak_concurrency);
    }

    const std::string out_tmv = path_under(a.out, "gen.tmv");
    save_tmv(out_tmv, result);
    man.add_output(out_tmv);
    std::vector<std::string> stage_paths;
    for (const auto& sv : stages) {
        const std::string p = path_under(a.out, "gen_level" + std::to_string(sv.level) + ".tmv");
        save_tmv(p, sv);
        man.add_output(p);
        stage_paths.push_back(p);
    }

    man.set_config(json{{"ckpt", a.ckpt},
                        {"config", a.config},
                        {"frames", a.frames},
                        {"seed", a.seed},
                        {"workers", a.workers},
                        {"emit_stages", a.emit_stages},
                        {"scene", a.scene},
                        {"prompt", a.prompt},
                        {"image", a.image},
                        {"first_last", a.first_last},
                        {"continue", a.cont},
                        {"overlap", a.overlap},
                        {"raw_weights", a.raw_weights},
                        {"out", a.out},
                        {"argv", argv_line}});
    man.set_seed(a.seed);
    man.write(path_under(a.out, "manifest.json"));

    std::printf("wrote %d frames to %s\n", result.frames, out_tmv.c_str());
    for (const auto& p : stage_paths) std::printf("stage output: %s\n", p.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// flops

struct FlopsArgs {
    std::string config;
    int frames = 0;
    int analytic_w = 0;
    bool intra = false;
    std::string out;
    ModelFlags model;
};

int cmd_flops(const FlopsArgs& a, const std::string& argv_line) {
    const ModelConfig cfg = a.model.config();
    cfg.validate();
    const ParallelConfig par = parse_config(a.config);
    FlopReport report = flop_count(cfg, par, a.frames);
    report.config = a.config;
    if (a.analytic_w > 0)
        report.analytic = analytic_bound(a.frames, par.stages(), a.analytic_w, a.intra);

    const std::string csv = report.to_csv();
    std::fputs(csv.c_str(), stdout);
    std::fprintf(stderr, "config=%s frames=%d total_flops=%llu\n", a.config.c_str(), a.frames,
                 static_cast<unsigned long long>(report.total));
    if (a.analytic_w > 0)
        std::fprintf(stderr, "analytic_bound=%.17g (W=%d, intra=%d)\n", report.analytic,
                     a.analytic_w, int(a.intra));

    if (!a.out.empty()) {
        ensure_dir(a.out);
        const std::string path = path_under(a.out, "flops.csv");
        write_file_bytes(path, std::vector<std::uint8_t>(csv.begin(), csv.end()));
        RunManifest man("flops");
        man.set_config(json{{"config", a.config},
                            {"frames", a.frames},
                            {"analytic_w", a.analytic_w},
                            {"intra", a.intra},
                            {"model", a.model.to_json()},
                            {"out", a.out},
                            {"argv", argv_line}});
        man.add_output(path);
        man.write(path_under(a.out, "manifest.json"));
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string input;
    std::string scene;
    std::vector<std::string> stage_inputs;
};

int cmd_eval(const EvalArgs& a) {
    const VideoSequence gen = load_tmv(a.input);
    const auto bytes = read_file_bytes(a.scene);
    const SceneParams sc = scene_from_json(std::string(bytes.begin(), bytes.end()));
    std::vector<VideoSequence> stages;
    for (const auto& p : a.stage_inputs) stages.push_back(load_tmv(p));
    const EvalReport r = evaluate(gen, sc, stages);

    std::printf("frames=%d\n", gen.frames);
    std::printf("mse=%.17g\n", r.mse);
    std::printf("signal_variance=%.17g\n", r.signal_variance);
    std::printf("signal_power=%.17g\n", r.signal_power);
    std::printf("mse_over_variance=%.17g\n", r.mse_over_variance);
    std::printf("drift_slope=%.17g\n", r.drift_slope);
    std::printf("anchor_violations=%lld\n", static_cast<long long>(r.anchor_violations));
    return 0;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const std::string& suite) {
    const auto results = run_verify_suites(suite);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "ratecast: coarse-to-fine video generation across frame-rate levels.\n"
        "Flags override --config-file values, which override built-in defaults."};
    app.require_subcommand(1);
    app.set_config("--config-file", "", "read option defaults from a key=value file");
    app.set_version_flag("--version", std::string(kToolVersion));

    DatasetArgs ds;
    auto* ds_cmd = app.add_subcommand("dataset", "synthesize a scene dataset");
    ds_cmd->add_option("--scenes", ds.scenes, "number of scenes")->check(CLI::PositiveNumber);
    ds_cmd->add_option("--multi-shot", ds.multi_shot, "probability of a two-shot scene")
        ->check(CLI::Range(0.0, 1.0));
    ds_cmd->add_option("--duration", ds.duration, "frames per scene at full rate")
        ->check(CLI::PositiveNumber);
    ds_cmd->add_option("--frame-dim", ds.frame_dim, "cells per frame")
        ->check(CLI::PositiveNumber);
    ds_cmd->add_option("--seed", ds.seed, "dataset seed");
    ds_cmd->add_option("--out", ds.out, "output directory");

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "run one curriculum stage");
    tr_cmd->add_option("--stage", tr.stage, "1: full-rate pretrain, 2: multi-rate fine-tune")
        ->required()
        ->check(CLI::Range(1, 2));
    tr_cmd->add_option("--data", tr.data, "dataset .tmd path")
        ->required()
        ->check(CLI::ExistingFile);
    tr_cmd->add_option("--steps", tr.steps, "optimizer steps")->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--batch", tr.batch, "batch size")->check(CLI::PositiveNumber);
    tr_cmd->add_option("--lr", tr.lr, "learning rate (default 5e-4 stage 1, 2e-5 stage 2)");
    tr_cmd->add_option("--warmup", tr.warmup, "linear warmup steps")
        ->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay");
    tr_cmd->add_option("--ema", tr.ema, "EMA decay");
    auto* tr_seed = tr_cmd->add_option("--seed", tr.seed, "training seed");
    tr_cmd->add_option("--t-max", tr.t_max, "temporal index range for offset draws");
    tr_cmd->add_option("--clip-frames", tr.clip_frames, "frames per training clip");
    tr_cmd->add_option("--cond-max", tr.cond_max, "max fraction of conditioned frames");
    tr_cmd->add_option("--rates", tr.rates, "stage-2 frame rates")->delimiter(',');
    tr_cmd->add_option("--init", tr.init, "stage-1 checkpoint to fine-tune from")
        ->check(CLI::ExistingFile);
    tr_cmd->add_option("--resume", tr.resume, "checkpoint to continue mid-run")
        ->check(CLI::ExistingFile);
    tr_cmd->add_option("--out", tr.out, "output directory");
    tr_cmd->add_option("--ckpt-every", tr.ckpt_every, "snapshot period in steps (0: final only)")
        ->check(CLI::NonNegativeNumber);
    tr.model.attach(tr_cmd);

    GenerateArgs gn;
    auto* gn_cmd = app.add_subcommand("generate", "sample a sequence coarse-to-fine");
    gn_cmd->add_option("--ckpt", gn.ckpt, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    gn_cmd->add_option("--config", gn.config, "stage layout, e.g. \"f(6,12,24)m(1,2,4)\"");
    gn_cmd->add_option("--frames", gn.frames, "full-rate frames to generate")
        ->check(CLI::PositiveNumber);
    gn_cmd->add_option("--seed", gn.seed, "generation seed");
    gn_cmd->add_option("--workers", gn.workers, "parallel workers per stage")
        ->check(CLI::PositiveNumber);
    gn_cmd->add_option("--out", gn.out, "output directory");
    gn_cmd->add_flag("--emit-stages", gn.emit_stages, "also write each coarse level");
    auto* gn_scene = gn_cmd->add_option("--scene", gn.scene, "scene .json to take the prompt from")
                         ->check(CLI::ExistingFile);
    auto* gn_prompt =
        gn_cmd->add_option("--prompt", gn.prompt, "prompt values, comma-separated")
            ->delimiter(',');
    auto* gn_image = gn_cmd->add_option("--image", gn.image, "condition on a first frame (.tmv)")
                         ->check(CLI::ExistingFile);
    auto* gn_fl = gn_cmd->add_option("--first-last", gn.first_last,
                                     "condition on first and last frames (.tmv)")
                      ->check(CLI::ExistingFile);
    auto* gn_cont = gn_cmd->add_option("--continue", gn.cont, "extend an existing .tmv")
                        ->check(CLI::ExistingFile);
    gn_cmd->add_option("--overlap", gn.overlap, "frames shared with --continue input")
        ->check(CLI::NonNegativeNumber);
    gn_cmd->add_flag("--raw-weights", gn.raw_weights, "sample with raw instead of EMA weights");
    gn_scene->excludes(gn_prompt);
    gn_image->excludes(gn_fl);
    gn_image->excludes(gn_cont);
    gn_fl->excludes(gn_cont);

    FlopsArgs fl;
    auto* fl_cmd = app.add_subcommand("flops", "report the per-stage cost model");
    fl_cmd->add_option("--config", fl.config, "stage layout string")->required();
    fl_cmd->add_option("--frames", fl.frames, "full-rate frames")
        ->required()
        ->check(CLI::PositiveNumber);
    fl_cmd->add_option("--analytic-w", fl.analytic_w, "uniform branching factor for the bound")
        ->check(CLI::NonNegativeNumber);
    fl_cmd->add_flag("--intra", fl.intra, "assume parallelism inside each window too");
    fl_cmd->add_option("--out", fl.out, "also write flops.csv + manifest here");
    fl.model.attach(fl_cmd);

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "score a generated sequence against its scene");
    ev_cmd->add_option("--input", ev.input, "generated .tmv")
        ->required()
        ->check(CLI::ExistingFile);
    ev_cmd->add_option("--scene", ev.scene, "scene parameters .json")
        ->required()
        ->check(CLI::ExistingFile);
    ev_cmd->add_option("--stage-output", ev.stage_inputs,
                       "coarse-level .tmv files to cross-check (repeatable)")
        ->check(CLI::ExistingFile);

    std::string suite = "all";
    auto* vf_cmd = app.add_subcommand("verify", "run the self-check suites");
    vf_cmd->add_option("--suite", suite, "all, grad, rope, subsample, anchor or cost")
        ->check(CLI::IsMember({"all", "grad", "rope", "subsample", "anchor", "cost"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    tr.seed_given = tr_seed->count() > 0;

    const std::string argv_line = join_args(argc, argv);
    try {
        if (*ds_cmd) return cmd_dataset(ds, argv_line);
        if (*tr_cmd) return cmd_train(tr, argv_line);
        if (*gn_cmd) return cmd_generate(gn, argv_line);
        if (*fl_cmd) return cmd_flops(fl, argv_line);
        if (*ev_cmd) return cmd_eval(ev);
        if (*vf_cmd) return cmd_verify(suite);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;  // no subcommand matched; require_subcommand should prevent this
}
