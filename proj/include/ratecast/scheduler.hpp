// Coarse-to-fine sampling. A parallel config plans a tree of segments: the
// first stage covers the whole timeline at the coarsest rate, each later
// stage splits the timeline into M_i equal windows at a finer rate, and every
// window conditions on the coarser frames inside it ("anchors") via the mask
// channel. Sibling windows share nothing and run concurrently; anchors are
// frozen bitwise after every stage. Per-node noise seeds are derived from
// (seed, level, segment), so output bytes are a pure function of inputs, not
// of worker count or dispatch order.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>
#include <vector>

#include "ratecast/denoiser.hpp"
#include "ratecast/multimask.hpp"
#include "ratecast/parallel_config.hpp"
#include "ratecast/schedule.hpp"
#include "ratecast/worldsim.hpp"

namespace ratecast {

struct TreeNode {
    int id = -1;
    int stage = 0;
    int level = 0;    // stride at full rate is 1 << level
    int segment = 0;  // index within the stage
    int parent = -1;
    int begin = 0, end = 0;      // full-rate frame window [begin, end), 0-based
    std::vector<int> positions;  // 1-based full-rate positions owned by this node
    std::vector<int> anchors;    // positions already generated by the previous stage
    std::vector<int> children;
};

struct GenerationTree {
    int total_frames = 0;
    ParallelConfig config;
    std::vector<int> stage_levels;
    std::vector<std::vector<int>> stage_nodes;
    std::vector<TreeNode> nodes;
};

inline GenerationTree plan_tree(const ParallelConfig& cfg, int n_frames) {
    cfg.validate();
    check_contract(n_frames > 0, "plan needs a positive frame count");
    const auto levels = cfg.levels();
    const int stages = cfg.stages();

    std::int64_t block_lcm = 1;
    bool divisible = true;
    for (int i = 0; i < stages; ++i) {
        const std::int64_t block = std::int64_t(1 << levels[std::size_t(i)]) *
                                   cfg.stage_segments[std::size_t(i)];
        block_lcm = std::lcm(block_lcm, block);
        if (n_frames % block != 0) divisible = false;
    }
    if (!divisible)
        throw PlanError("frame count " + std::to_string(n_frames) +
                        " is not divisible by every stage's stride*segments; valid counts are "
                        "multiples of " +
                        std::to_string(block_lcm) + " (e.g. " + std::to_string(block_lcm) + ", " +
                        std::to_string(2 * block_lcm) + ", " + std::to_string(3 * block_lcm) +
                        ")");
    for (int i = 1; i < stages; ++i)
        if (cfg.stage_segments[std::size_t(i)] % cfg.stage_segments[std::size_t(i - 1)] != 0)
            throw PlanError("segment counts must nest: " +
                            std::to_string(cfg.stage_segments[std::size_t(i - 1)]) +
                            " windows at stage " + std::to_string(i - 1) +
                            " do not contain an integer number of the " +
                            std::to_string(cfg.stage_segments[std::size_t(i)]) +
                            " windows at stage " + std::to_string(i));

    GenerationTree tree;
    tree.total_frames = n_frames;
    tree.config = cfg;
    tree.stage_levels = levels;
    tree.stage_nodes.resize(std::size_t(stages));
    for (int i = 0; i < stages; ++i) {
        const int m = 1 << levels[std::size_t(i)];
        const int segments = cfg.stage_segments[std::size_t(i)];
        const int window = n_frames / segments;
        for (int j = 0; j < segments; ++j) {
            TreeNode node;
            node.id = int(tree.nodes.size());
            node.stage = i;
            node.level = levels[std::size_t(i)];
            node.segment = j;
            node.begin = j * window;
            node.end = (j + 1) * window;
            for (int p = node.begin + m; p <= node.end; p += m) node.positions.push_back(p);
            if (i > 0) {
                const int coarse = 1 << levels[std::size_t(i - 1)];
                for (int p : node.positions)
                    if (p % coarse == 0) node.anchors.push_back(p);
                const int parent_window = n_frames / cfg.stage_segments[std::size_t(i - 1)];
                const int parent_seg = node.begin / parent_window;
                node.parent = tree.stage_nodes[std::size_t(i - 1)][std::size_t(parent_seg)];
                tree.nodes[std::size_t(node.parent)].children.push_back(node.id);
            }
            tree.stage_nodes[std::size_t(i)].push_back(node.id);
            tree.nodes.push_back(std::move(node));
        }
    }
    return tree;
}

// Explicit Euler for dz/dt = -v(z, t) over a descending time grid. The state
// update is a raw loop (not tracked ops), so an instrumented run counts
// exactly the velocity evaluations.
template <typename Real, typename VelocityFn>
std::vector<Real> euler_integrate(std::vector<Real> z, VelocityFn&& velocity,
                                  const std::vector<double>& grid) {
    check_contract(grid.size() >= 2, "time grid needs at least two points");
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double dt = grid[k] - grid[k + 1];
        const auto v = velocity(z, grid[k]);
        check_dim(v.size() == z.size(), "velocity size does not match state");
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] -= Real(dt * double(v[i]));
            if (!std::isfinite(double(z[i])))
                throw NumericError("non-finite state after integration step " +
                                   std::to_string(k) + " of " + std::to_string(grid.size() - 1));
        }
    }
    return z;
}

template <typename Real>
std::vector<Real> ode_sample(const ModelParams<Real>& params, const ModelConfig& cfg,
                             const MultiMaskCondition<Real>& cond, const std::vector<Real>& prompt,
                             const TemporalIndexPlan& plan, int steps, std::uint64_t rng_seed,
                             const NoiseSchedule& sched = {}) {
    check_contract(steps >= 1, "sampling needs at least one step");
    const int t_frames = int(plan.indices.size());
    check_contract(t_frames > 0, "sampling needs a non-empty index plan");
    NoGradGuard ng;

    Rng rng(rng_seed);
    std::vector<Real> z(std::size_t(t_frames) * cfg.frame_dim);
    for (auto& x : z) x = Real(rng.gaussian());

    PromptVector<Real> p{prompt};
    auto velocity = [&](const std::vector<Real>& state, double t) {
        auto z_t = Tensor<Real>::from({t_frames, cfg.frame_dim}, state);
        auto channels = build_conditioned_input(z_t, cond);
        auto v = forward(params, cfg, channels.channels, t, p, plan);
        const auto vv = v.vals();
        return std::vector<Real>(vv.begin(), vv.end());
    };
    return euler_integrate(std::move(z), velocity, time_grid(steps, sched.sigma_shift));
}

struct NodeTrace {
    int node = -1;
    int worker = -1;
    std::int64_t start_ns = 0, end_ns = 0;
    std::uint64_t flops = 0;
};

struct ExecutionTrace {
    std::vector<NodeTrace> nodes;  // indexed by node id
    int peak_concurrency = 0;
    std::uint64_t total_flops = 0;

    // Stage barriers make this structural; violation means the pool is broken.
    void assert_dependencies(const GenerationTree& tree) const {
        for (const auto& node : tree.nodes)
            if (node.parent >= 0)
                check_contract(nodes[std::size_t(node.parent)].end_ns <=
                                   nodes[std::size_t(node.id)].start_ns,
                               "node " + std::to_string(node.id) + " started before parent " +
                                   std::to_string(node.parent) + " finished");
    }
};

// Runs fn over every node, stage by stage; within a stage up to `workers`
// sibling nodes execute concurrently. Nodes only ever read results of earlier
// stages, so the per-stage join is the only synchronization needed.
template <typename NodeFn>
ExecutionTrace worker_pool_execute(const GenerationTree& tree, int workers, NodeFn&& fn) {
    check_contract(workers >= 1, "worker pool needs at least one worker");
    ExecutionTrace trace;
    trace.nodes.resize(tree.nodes.size());
    std::atomic<int> running{0};
    std::atomic<int> peak{0};
    const auto origin = std::chrono::steady_clock::now();
    const auto now_ns = [&origin] {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now() - origin)
            .count();
    };

    const auto run_node = [&](int node_id, int worker_id) {
        NodeTrace& nt = trace.nodes[std::size_t(node_id)];
        nt.node = node_id;
        nt.worker = worker_id;
        const int cur = running.fetch_add(1) + 1;
        int seen = peak.load();
        while (cur > seen && !peak.compare_exchange_weak(seen, cur)) {
        }
        nt.start_ns = now_ns();
        const std::uint64_t before = flops_count();
        fn(tree.nodes[std::size_t(node_id)]);
        nt.flops = flops_count() - before;
        nt.end_ns = now_ns();
        running.fetch_sub(1);
    };

    for (const auto& stage : tree.stage_nodes) {
        const int pool = std::min<int>(workers, int(stage.size()));
        if (pool <= 1) {
            for (int node_id : stage) run_node(node_id, 0);
            continue;
        }
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        threads.reserve(std::size_t(pool));
        for (int w = 0; w < pool; ++w)
            threads.emplace_back([&, w] {
                for (std::size_t i = next.fetch_add(1); i < stage.size(); i = next.fetch_add(1))
                    run_node(stage[i], w);
            });
        for (auto& t : threads) t.join();
    }
    trace.peak_concurrency = peak.load();
    for (const auto& nt : trace.nodes) trace.total_flops += nt.flops;
    trace.assert_dependencies(tree);
    return trace;
}

struct GenerateOptions {
    int workers = 1;
    double index_offset = 0.0;  // temporal index of full-rate position 1, minus 1
    NoiseSchedule sched{};
};

struct GenerateStats {
    std::uint64_t flops = 0;
    int peak_concurrency = 0;
};

template <typename Real>
VideoSequence generate(const ModelParams<Real>& params, const ModelConfig& cfg,
                       const ParallelConfig& par, const std::vector<Real>& prompt,
                       const MultiMaskCondition<Real>& initial_cond, int n_frames,
                       std::uint64_t seed, const GenerateOptions& opt = {},
                       std::vector<VideoSequence>* stage_outputs = nullptr,
                       GenerateStats* stats = nullptr) {
    cfg.validate();
    const auto tree = plan_tree(par, n_frames);
    const int d = cfg.frame_dim;
    for (const auto& [pos, frame] : initial_cond.entries) {
        check_contract(pos >= 0 && pos < n_frames, "initial condition at frame " +
                                                       std::to_string(pos) + " outside [0, " +
                                                       std::to_string(n_frames) + ")");
        check_dim(int(frame.size()) == d, "initial condition frame has wrong channel count");
    }

    std::vector<Real> buffer(std::size_t(n_frames) * d, Real(0));
    const auto buffer_row = [&](int position) {  // 1-based position -> row pointer
        return buffer.data() + std::size_t(position - 1) * d;
    };

    const auto run_node = [&](const TreeNode& node) {
        const int t_window = int(node.positions.size());
        const int m = 1 << node.level;

        MultiMaskCondition<Real> cond;
        if (node.stage > 0) {
            for (int j = 0; j < t_window; ++j) {
                const int p = node.positions[std::size_t(j)];
                if (std::binary_search(node.anchors.begin(), node.anchors.end(), p))
                    cond.entries[j] = std::vector<Real>(buffer_row(p), buffer_row(p) + d);
            }
        }
        for (int j = 0; j < t_window; ++j) {
            const int p = node.positions[std::size_t(j)];
            const auto it = initial_cond.entries.find(p - 1);
            if (it != initial_cond.entries.end()) cond.entries[j] = it->second;
        }

        const auto plan = assign_indices(t_window, node.level,
                                         opt.index_offset + node.begin + m - 1,
                                         opt.index_offset + double(n_frames));
        const auto node_seed = derive_seed(seed, "segment", std::uint64_t(node.level),
                                           std::uint64_t(node.segment));
        auto z = ode_sample(params, cfg, cond, prompt, plan,
                            par.stage_steps[std::size_t(node.stage)], node_seed, opt.sched);
        z = overwrite_anchors(std::move(z), t_window, d, cond);
        for (int j = 0; j < t_window; ++j)
            std::copy_n(z.begin() + std::int64_t(j) * d, d,
                        buffer_row(node.positions[std::size_t(j)]));
    };

    const auto trace = worker_pool_execute(tree, opt.workers, run_node);
    if (stats) {
        stats->flops = trace.total_flops;
        stats->peak_concurrency = trace.peak_concurrency;
    }

    const double base_fps = par.stage_fps.back();
    if (stage_outputs) {
        stage_outputs->clear();
        for (int i = 0; i < par.stages(); ++i) {
            const int m = 1 << tree.stage_levels[std::size_t(i)];
            VideoSequence seq;
            seq.frames = n_frames / m;
            seq.frame_dim = d;
            seq.level = tree.stage_levels[std::size_t(i)];
            seq.base_fps = base_fps;
            seq.t_start = opt.index_offset + m - 1;
            seq.data.resize(std::size_t(seq.frames) * d);
            for (int j = 0; j < seq.frames; ++j) {
                const Real* src = buffer_row((j + 1) * m);
                for (int c = 0; c < d; ++c) seq.data[std::size_t(j) * d + c] = float(src[c]);
            }
            stage_outputs->push_back(std::move(seq));
        }
    }

    VideoSequence out;
    out.frames = n_frames;
    out.frame_dim = d;
    out.level = 0;
    out.base_fps = base_fps;
    out.t_start = opt.index_offset;
    out.data.resize(std::size_t(n_frames) * d);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = float(buffer[i]);
    return out;
}

template <typename Real>
VideoSequence continue_video(const ModelParams<Real>& params, const ModelConfig& cfg,
                             const ParallelConfig& par, const std::vector<Real>& prompt,
                             const VideoSequence& previous, int overlap_frames, int n_new,
                             std::uint64_t seed, const GenerateOptions& opt = {}) {
    check_contract(previous.level == 0, "continuation needs a full-rate input sequence");
    check_contract(previous.frame_dim == cfg.frame_dim, "frame dim mismatch with model");
    check_contract(overlap_frames >= 0 && overlap_frames <= previous.frames,
                   "overlap " + std::to_string(overlap_frames) + " exceeds the " +
                       std::to_string(previous.frames) + " available frames");
    check_contract(n_new > overlap_frames, "new window must extend past the overlap");

    MultiMaskCondition<Real> cond;
    for (int j = 0; j < overlap_frames; ++j) {
        const float* row = previous.row(previous.frames - overlap_frames + j);
        cond.entries[j] = std::vector<Real>(row, row + previous.frame_dim);
    }
    GenerateOptions gen_opt = opt;
    gen_opt.index_offset = previous.t_start + double(previous.frames - overlap_frames);

    const auto fresh = generate(params, cfg, par, prompt, cond, n_new, seed, gen_opt);

    VideoSequence out;
    out.frames = previous.frames - overlap_frames + n_new;
    out.frame_dim = previous.frame_dim;
    out.level = 0;
    out.base_fps = previous.base_fps;
    out.t_start = previous.t_start;
    out.data.reserve(std::size_t(out.frames) * out.frame_dim);
    out.data.assign(previous.data.begin(),
                    previous.data.begin() +
                        std::int64_t(previous.frames - overlap_frames) * previous.frame_dim);
    out.data.insert(out.data.end(), fresh.data.begin(), fresh.data.end());
    return out;
}

// --- cost model -------------------------------------------------------------

struct FlopStage {
    int stage = 0;
    int nodes = 0;
    int frames_per_node = 0;
    int steps = 0;
    std::uint64_t flops = 0;
};

struct FlopReport {
    std::string config;
    int total_frames = 0;
    std::vector<FlopStage> stages;
    std::uint64_t total = 0;
    double analytic = 0.0;  // closed-form bound when the config carries a W

    std::string to_csv() const {
        std::string out = "stage,nodes,frames_per_node,steps,flops\n";
        for (const auto& s : stages)
            out += std::to_string(s.stage) + ',' + std::to_string(s.nodes) + ',' +
                   std::to_string(s.frames_per_node) + ',' + std::to_string(s.steps) + ',' +
                   std::to_string(s.flops) + '\n';
        out += "total,,,," + std::to_string(total) + '\n';
        return out;
    }
};

// Per-stage sum of forward costs: M_i windows of N/(m_i M_i) frames, each
// denoised steps_i times.
inline FlopReport flop_count(const ModelConfig& model, const ParallelConfig& par, int n_frames) {
    const auto tree = plan_tree(par, n_frames);  // validates divisibility
    FlopReport report;
    report.total_frames = n_frames;
    for (int i = 0; i < par.stages(); ++i) {
        FlopStage stage;
        stage.stage = i;
        stage.nodes = par.stage_segments[std::size_t(i)];
        stage.frames_per_node =
            n_frames / ((1 << tree.stage_levels[std::size_t(i)]) * stage.nodes);
        stage.steps = par.stage_steps[std::size_t(i)];
        stage.flops = std::uint64_t(stage.nodes) * std::uint64_t(stage.steps) *
                      flops_forward(model, stage.frames_per_node);
        report.total += stage.flops;
        report.stages.push_back(stage);
    }
    return report;
}

// Geometric-sum complexity of a uniform W-way tree, in squared-frame units:
// N^2/4^K * sum_{i=0}^{K-1} r^i with r = 4/W (stage-parallel) or 4/W^2
// (additionally parallel inside each window). Each term is computed as a
// ratio of exact integer powers, so the value matches a direct summation of
// the series bit for bit over the whole documented range (K <= 16, W <= 8),
// and is exact in double arithmetic whenever W is a power of two.
inline double analytic_bound(std::int64_t n_frames, int k_stages, int w_branch,
                             bool intra_parallel) {
    check_contract(n_frames > 0 && k_stages > 0 && w_branch > 0,
                   "bound needs positive N, K and W");
    const unsigned __int128 den_base =
        intra_parallel ? (unsigned __int128)(w_branch) * w_branch : (unsigned __int128)(w_branch);
    unsigned __int128 num = 1, den = 1;
    double sum = 0.0;
    double term_fallback = double(num) / double(den);
    bool exact = true;
    for (int i = 0; i < k_stages; ++i) {
        if (exact) {
            sum += double(num) / double(den);
            if (num > (unsigned __int128)(-1) / 4 || den > (unsigned __int128)(-1) / den_base) {
                exact = false;  // beyond the documented range; continue geometrically
                term_fallback = double(num) / double(den);
            } else {
                num *= 4;
                den *= den_base;
            }
        } else {
            term_fallback *= 4.0 / double(den_base);
            sum += term_fallback;
        }
    }
    double lead = double(n_frames) * double(n_frames);
    for (int i = 0; i < k_stages; ++i) lead /= 4.0;
    return lead * sum;
}

}  // namespace ratecast
