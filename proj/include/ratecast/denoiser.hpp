#pragma once

// Bidirectional transformer velocity model. Input frames enter as
// [noisy | condition | mask] channel blocks, timestep and prompt embeddings
// are added to every token after input projection, and attention applies a
// real-valued rotary index to queries and keys so only index differences
// matter. No attention mask: every frame attends to every frame.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ratecast/errors.hpp"
#include "ratecast/multimask.hpp"
#include "ratecast/rng.hpp"
#include "ratecast/temporal.hpp"
#include "ratecast/tensor.hpp"

namespace ratecast {

struct ModelConfig {
    int frame_dim = 16;  // D, channels per frame
    int width = 64;
    int layers = 4;
    int heads = 4;
    int cond_dim = 8;
    int max_t = 256;
    double rope_theta = kRopeThetaBase;

    int head_dim() const { return width / heads; }
    int in_channels() const { return 2 * frame_dim + 1; }
    int mlp_width() const { return 4 * width; }

    void validate() const {
        check_config(frame_dim > 0 && width > 0 && layers > 0 && heads > 0 && cond_dim > 0 &&
                         max_t > 0,
                     "model dimensions must be positive");
        check_config(width % heads == 0, "width " + std::to_string(width) +
                                             " is not divisible by heads " + std::to_string(heads));
        check_config(head_dim() % 2 == 0, "head_dim " + std::to_string(head_dim()) +
                                              " must be even for rotary pairs");
    }

    RopeParams rope() const { return RopeParams{rope_theta, head_dim()}; }
};

template <typename Real>
struct PromptVector {
    std::vector<Real> values;
};

template <typename Real>
struct ModelParams {
    struct Layer {
        Tensor<Real> attn_gain, wq, wk, wv, wo;
        Tensor<Real> mlp_gain, w1, b1, w2, b2;
    };

    Tensor<Real> w_in, b_in;
    Tensor<Real> t_w1, t_b1, t_w2, t_b2;
    Tensor<Real> p_w, p_b;
    std::vector<Layer> layers;
    Tensor<Real> out_gain, w_out, b_out;

    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Rng rng(derive_seed(seed, "model-init"));
        const int w = cfg.width;
        const int d = cfg.frame_dim;
        const int in_ch = cfg.in_channels();
        // Residual-branch output projections get an extra 1/sqrt(2 layers)
        // so activations stay O(1) at depth.
        const double res = 1.0 / std::sqrt(2.0 * cfg.layers);
        auto mat = [&](int rows, int cols, double std) {
            return Tensor<Real>::randn({rows, cols}, rng, std, true);
        };
        auto vec_zero = [&](int n) { return Tensor<Real>::zeros({n}, true); };
        auto vec_one = [&](int n) { return Tensor<Real>::full({n}, Real(1), true); };

        ModelParams p;
        p.w_in = mat(in_ch, w, 1.0 / std::sqrt(double(in_ch)));
        p.b_in = vec_zero(w);
        p.t_w1 = mat(w, w, 1.0 / std::sqrt(double(w)));
        p.t_b1 = vec_zero(w);
        p.t_w2 = mat(w, w, 1.0 / std::sqrt(double(w)));
        p.t_b2 = vec_zero(w);
        p.p_w = mat(cfg.cond_dim, w, 1.0 / std::sqrt(double(cfg.cond_dim)));
        p.p_b = vec_zero(w);
        for (int l = 0; l < cfg.layers; ++l) {
            Layer layer;
            layer.attn_gain = vec_one(w);
            layer.wq = mat(w, w, 1.0 / std::sqrt(double(w)));
            layer.wk = mat(w, w, 1.0 / std::sqrt(double(w)));
            layer.wv = mat(w, w, 1.0 / std::sqrt(double(w)));
            layer.wo = mat(w, w, res / std::sqrt(double(w)));
            layer.mlp_gain = vec_one(w);
            layer.w1 = mat(w, cfg.mlp_width(), 1.0 / std::sqrt(double(w)));
            layer.b1 = vec_zero(cfg.mlp_width());
            layer.w2 = mat(cfg.mlp_width(), w, res / std::sqrt(double(cfg.mlp_width())));
            layer.b2 = vec_zero(w);
            p.layers.push_back(std::move(layer));
        }
        p.out_gain = vec_one(w);
        p.w_out = mat(w, d, 0.1 / std::sqrt(double(w)));
        p.b_out = vec_zero(d);
        return p;
    }

    std::vector<std::pair<std::string, Tensor<Real>*>> named() {
        std::vector<std::pair<std::string, Tensor<Real>*>> out = {
            {"w_in", &w_in},   {"b_in", &b_in},   {"t_w1", &t_w1}, {"t_b1", &t_b1},
            {"t_w2", &t_w2},   {"t_b2", &t_b2},   {"p_w", &p_w},   {"p_b", &p_b},
        };
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string pre = "layers." + std::to_string(l) + ".";
            out.emplace_back(pre + "attn_gain", &layers[l].attn_gain);
            out.emplace_back(pre + "wq", &layers[l].wq);
            out.emplace_back(pre + "wk", &layers[l].wk);
            out.emplace_back(pre + "wv", &layers[l].wv);
            out.emplace_back(pre + "wo", &layers[l].wo);
            out.emplace_back(pre + "mlp_gain", &layers[l].mlp_gain);
            out.emplace_back(pre + "w1", &layers[l].w1);
            out.emplace_back(pre + "b1", &layers[l].b1);
            out.emplace_back(pre + "w2", &layers[l].w2);
            out.emplace_back(pre + "b2", &layers[l].b2);
        }
        out.emplace_back("out_gain", &out_gain);
        out.emplace_back("w_out", &w_out);
        out.emplace_back("b_out", &b_out);
        return out;
    }

    std::vector<std::pair<std::string, const Tensor<Real>*>> named() const {
        auto mutable_named = const_cast<ModelParams*>(this)->named();
        std::vector<std::pair<std::string, const Tensor<Real>*>> out;
        out.reserve(mutable_named.size());
        for (auto& [n, t] : mutable_named) out.emplace_back(n, t);
        return out;
    }

    // Fresh leaves sharing this instance's value storage. Each worker builds
    // its tape over its own aliases so gradient buffers never race.
    ModelParams alias_for_grad() const {
        ModelParams out = *this;
        for (auto& [name, t] : out.named()) *t = t->alias_leaf(true);
        return out;
    }
};

// Sinusoidal features of the diffusion time followed by a two-layer MLP.
// t is scaled by 100 and pair k oscillates at 100^(-k/half), giving feature
// frequencies between 1 and 100 radians per unit time.
template <typename Real>
Tensor<Real> embed_timestep(const ModelParams<Real>& params, const ModelConfig& cfg, double t) {
    check_contract(t >= 0.0 && t <= 1.0, "timestep " + std::to_string(t) + " outside [0, 1]");
    const int w = cfg.width;
    const int half = w / 2;
    std::vector<Real> feat(w);
    for (int k = 0; k < half; ++k) {
        const double freq = std::pow(100.0, -double(k) / double(half));
        feat[2 * k] = Real(std::sin(100.0 * t * freq));
        feat[2 * k + 1] = Real(std::cos(100.0 * t * freq));
    }
    auto f = Tensor<Real>::from({1, w}, std::move(feat));
    auto h = silu(add_rowvec(matmul(f, params.t_w1), params.t_b1));
    return add_rowvec(matmul(h, params.t_w2), params.t_b2);  // [1 x width]
}

template <typename Real>
Tensor<Real> forward(const ModelParams<Real>& params, const ModelConfig& cfg,
                     const Tensor<Real>& channels, double t, const PromptVector<Real>& prompt,
                     const TemporalIndexPlan& plan) {
    cfg.validate();
    check_dim(channels.rank() == 2 && channels.shape()[1] == cfg.in_channels(),
              "denoiser input " + shape_str(channels.shape()) + " does not match " +
                  std::to_string(cfg.in_channels()) + " channels");
    const int frames = channels.shape()[0];
    check_contract(frames <= cfg.max_t, "frame count " + std::to_string(frames) +
                                            " exceeds max_T " + std::to_string(cfg.max_t));
    check_dim(int(plan.indices.size()) == frames,
              "index plan length " + std::to_string(plan.indices.size()) +
                  " does not match frame count " + std::to_string(frames));
    check_dim(int(prompt.values.size()) == cfg.cond_dim,
              "prompt length " + std::to_string(prompt.values.size()) + " does not match cond_dim " +
                  std::to_string(cfg.cond_dim));

    const int hd = cfg.head_dim();
    const Real inv_sqrt_hd = Real(1.0 / std::sqrt(double(hd)));
    auto tables = rope_tables<Real>(plan.indices, cfg.rope());

    auto x = add_rowvec(matmul(channels, params.w_in), params.b_in);
    auto e_t = embed_timestep(params, cfg, t);
    auto p_in = Tensor<Real>::from({1, cfg.cond_dim}, prompt.values);
    auto e_p = add_rowvec(matmul(p_in, params.p_w), params.p_b);
    auto e = add(e_t, e_p);
    x = add_rowvec(x, e);

    for (const auto& layer : params.layers) {
        auto h = rms_norm(x, layer.attn_gain);
        auto q = matmul(h, layer.wq);
        auto k = matmul(h, layer.wk);
        auto v = matmul(h, layer.wv);
        std::vector<Tensor<Real>> head_out;
        head_out.reserve(cfg.heads);
        for (int hi = 0; hi < cfg.heads; ++hi) {
            auto qi = rope_rotate(slice_channels(q, hi * hd, hd), tables);
            auto ki = rope_rotate(slice_channels(k, hi * hd, hd), tables);
            auto vi = slice_channels(v, hi * hd, hd);
            auto logits = scale(matmul(qi, transpose(ki)), inv_sqrt_hd);
            auto attn = softmax_rows(logits);
            head_out.push_back(matmul(attn, vi));
        }
        x = add(x, matmul(concat_channels(head_out), layer.wo));
        auto h2 = rms_norm(x, layer.mlp_gain);
        auto m = silu(add_rowvec(matmul(h2, layer.w1), layer.b1));
        m = add_rowvec(matmul(m, layer.w2), layer.b2);
        x = add(x, m);
    }
    auto y = rms_norm(x, params.out_gain);
    return add_rowvec(matmul(y, params.w_out), params.b_out);
}

// Exact multiply-add count of one forward call, mirroring the op sequence
// above term by term (table construction and index shuffling are free).
// Dominant attention term: layers * heads * T^2 * head_dim * 2 from the
// logit and value products, plus layers * heads * T^2 * 5 from the logit
// scale and softmax passes. Everything else is linear in T or constant.
inline std::uint64_t flops_forward(const ModelConfig& cfg, int frames) {
    cfg.validate();
    check_contract(frames > 0 && frames <= cfg.max_t,
                   "frame count " + std::to_string(frames) + " outside [1, " +
                       std::to_string(cfg.max_t) + "]");
    const std::int64_t t = frames;
    const std::int64_t w = cfg.width;
    const std::int64_t hd = cfg.head_dim();
    const std::int64_t mw = cfg.mlp_width();
    using namespace flopcost;

    std::uint64_t f = 0;
    // input projection
    f += matmul(t, cfg.in_channels(), w) + add_rowvec(t, w);
    // timestep MLP
    f += matmul(1, w, w) + add_rowvec(1, w) + silu(w) + matmul(1, w, w) + add_rowvec(1, w);
    // prompt projection and embedding add
    f += matmul(1, cfg.cond_dim, w) + add_rowvec(1, w) + elementwise(w) + add_rowvec(t, w);
    for (int l = 0; l < cfg.layers; ++l) {
        f += rms_norm(t, w);
        f += 3 * matmul(t, w, w);  // q, k, v
        for (int hi = 0; hi < cfg.heads; ++hi) {
            f += 2 * 3 * elementwise(t * hd);  // rotary on q and k
            f += matmul(t, hd, t);             // q k^T
            f += scale(t * t);
            f += softmax_rows(t, t);
            f += matmul(t, t, hd);  // attn v
        }
        f += matmul(t, w, w) + elementwise(t * w);  // output projection, residual
        f += rms_norm(t, w);
        f += matmul(t, w, mw) + add_rowvec(t, mw) + silu(t * mw);
        f += matmul(t, mw, w) + add_rowvec(t, w) + elementwise(t * w);  // mlp, residual
    }
    f += rms_norm(t, w) + matmul(t, w, cfg.frame_dim) + add_rowvec(t, cfg.frame_dim);
    return f;
}

}  // namespace ratecast
