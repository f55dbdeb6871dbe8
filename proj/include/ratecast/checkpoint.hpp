// Training state and its on-disk format.
//
// Layout: magic "TMCK", u32 format version, length-prefixed JSON metadata
// (model config + hash, stage, step, seed), u32 array count, then named
// parameter arrays (length-prefixed name, u32 ndim, u32 dims, little-endian
// f32 payload). Parameters, EMA parameters and both optimizer moments are
// stored under "param/", "ema/", "adam_m/", "adam_v/" prefixes in the stable
// parameter order, which makes save -> load -> save byte-identical.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ratecast/denoiser.hpp"
#include "ratecast/io.hpp"

namespace ratecast {

enum class TrainStage { single_rate = 1, multi_rate = 2 };

inline std::string model_config_canonical(const ModelConfig& cfg) {
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "frame_dim=%d;width=%d;layers=%d;heads=%d;cond_dim=%d;max_t=%d;rope_theta=%.17g",
                  cfg.frame_dim, cfg.width, cfg.layers, cfg.heads, cfg.cond_dim, cfg.max_t,
                  cfg.rope_theta);
    return std::string(buf);
}

inline std::string model_config_hash(const ModelConfig& cfg) {
    return hash_hex(fnv64(model_config_canonical(cfg)));
}

template <typename Real>
struct TrainState {
    ModelConfig model;
    ModelParams<Real> params;
    ModelParams<Real> ema;
    // Adam first/second moments, parallel to params.named() order.
    std::vector<std::vector<Real>> adam_m, adam_v;
    TrainStage stage = TrainStage::single_rate;
    std::int64_t step = 0;  // optimizer steps taken within the current stage
    std::uint64_t seed = 0;

    static TrainState fresh(const ModelConfig& cfg, std::uint64_t seed) {
        TrainState st;
        st.model = cfg;
        st.seed = seed;
        st.params = ModelParams<Real>::init(cfg, seed);
        st.ema = deep_copy(st.params);
        const auto names = st.params.named();
        st.adam_m.resize(names.size());
        st.adam_v.resize(names.size());
        for (std::size_t i = 0; i < names.size(); ++i) {
            st.adam_m[i].assign(names[i].second->vals().size(), Real(0));
            st.adam_v[i].assign(names[i].second->vals().size(), Real(0));
        }
        return st;
    }

    // Fresh optimizer state and step counter for the next curriculum stage;
    // parameters and EMA carry over.
    void enter_stage(TrainStage next) {
        stage = next;
        step = 0;
        for (auto& m : adam_m) std::fill(m.begin(), m.end(), Real(0));
        for (auto& v : adam_v) std::fill(v.begin(), v.end(), Real(0));
    }

    static ModelParams<Real> deep_copy(const ModelParams<Real>& src) {
        ModelParams<Real> dst = src;
        for (auto& [name, t] : dst.named()) {
            const auto v = t->vals();
            *t = Tensor<Real>::from(t->shape(), std::vector<Real>(v.begin(), v.end()),
                                    t->grad_enabled());
        }
        return dst;
    }
};

namespace detail {

template <typename Real>
void write_named_array(BinWriter& w, const std::string& name, const Shape& shape,
                       std::span<const Real> values) {
    w.str(name);
    w.u32(std::uint32_t(shape.size()));
    for (int d : shape) w.u32(std::uint32_t(d));
    if constexpr (std::is_same_v<Real, float>) {
        w.f32_array(values.data(), values.size());
    } else {
        for (Real v : values) w.f32(float(v));
    }
}

template <typename Real>
void read_named_array(BinReader& r, const std::string& want_name, const Shape& want_shape,
                      std::span<Real> out) {
    const std::string name = r.str();
    if (name != want_name)
        throw IoError("checkpoint array order mismatch: expected " + want_name + ", found " + name);
    const auto ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = int(r.u32());
    if (shape != want_shape)
        throw IoError("checkpoint array " + name + " has shape " + shape_str(shape) +
                      ", expected " + shape_str(want_shape));
    check_contract(std::int64_t(out.size()) == shape_size(shape), "array buffer size mismatch");
    if constexpr (std::is_same_v<Real, float>) {
        r.f32_array(out.data(), out.size());
    } else {
        for (auto& v : out) v = Real(r.f32());
    }
}

}  // namespace detail

template <typename Real>
void save_checkpoint(const std::string& path, const TrainState<Real>& state) {
    nlohmann::json meta;
    meta["format"] = "checkpoint";
    meta["model"] = {{"frame_dim", state.model.frame_dim}, {"width", state.model.width},
                     {"layers", state.model.layers},       {"heads", state.model.heads},
                     {"cond_dim", state.model.cond_dim},   {"max_t", state.model.max_t},
                     {"rope_theta", state.model.rope_theta}};
    meta["model_hash"] = model_config_hash(state.model);
    meta["stage"] = int(state.stage);
    meta["step"] = state.step;
    meta["seed"] = hash_hex(state.seed);  // hex keeps full u64 precision in JSON

    BinWriter w;
    w.magic("TMCK");
    w.u32(1);
    w.str(meta.dump());

    const auto names = state.params.named();
    const auto ema_names = state.ema.named();
    w.u32(std::uint32_t(4 * names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& [name, t] = names[i];
        detail::write_named_array<Real>(w, "param/" + name, t->shape(), t->vals());
        detail::write_named_array<Real>(w, "ema/" + name, ema_names[i].second->shape(),
                                        ema_names[i].second->vals());
        detail::write_named_array<Real>(w, "adam_m/" + name, t->shape(), state.adam_m[i]);
        detail::write_named_array<Real>(w, "adam_v/" + name, t->shape(), state.adam_v[i]);
    }
    write_file_bytes(path, w.bytes());
}

template <typename Real>
TrainState<Real> load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    BinReader r(bytes);
    r.expect_magic("TMCK");
    const auto version = r.u32();
    if (version != 1) throw IoError("unsupported checkpoint version " + std::to_string(version));
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(r.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(std::string("checkpoint metadata: ") + e.what());
    }

    ModelConfig cfg;
    const auto& m = meta.at("model");
    cfg.frame_dim = m.at("frame_dim").get<int>();
    cfg.width = m.at("width").get<int>();
    cfg.layers = m.at("layers").get<int>();
    cfg.heads = m.at("heads").get<int>();
    cfg.cond_dim = m.at("cond_dim").get<int>();
    cfg.max_t = m.at("max_t").get<int>();
    cfg.rope_theta = m.at("rope_theta").get<double>();
    cfg.validate();
    if (meta.at("model_hash").get<std::string>() != model_config_hash(cfg))
        throw IoError("checkpoint model hash does not match its own config block");

    TrainState<Real> state;
    state.model = cfg;
    state.params = ModelParams<Real>::init(cfg, 0);  // shapes only; values replaced below
    state.ema = TrainState<Real>::deep_copy(state.params);
    state.stage = TrainStage(meta.at("stage").get<int>());
    state.step = meta.at("step").get<std::int64_t>();
    state.seed = std::stoull(meta.at("seed").get<std::string>(), nullptr, 16);

    auto names = state.params.named();
    auto ema_names = state.ema.named();
    state.adam_m.resize(names.size());
    state.adam_v.resize(names.size());
    const auto n_arrays = r.u32();
    if (n_arrays != 4 * names.size())
        throw IoError("checkpoint holds " + std::to_string(n_arrays) + " arrays, expected " +
                      std::to_string(4 * names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto& [name, t] = names[i];
        state.adam_m[i].resize(std::size_t(t->size()));
        state.adam_v[i].resize(std::size_t(t->size()));
        detail::read_named_array<Real>(r, "param/" + name, t->shape(), t->mutable_vals());
        detail::read_named_array<Real>(r, "ema/" + name, ema_names[i].second->shape(),
                                       ema_names[i].second->mutable_vals());
        detail::read_named_array<Real>(r, "adam_m/" + name, t->shape(), state.adam_m[i]);
        detail::read_named_array<Real>(r, "adam_v/" + name, t->shape(), state.adam_v[i]);
    }
    if (!r.at_end()) throw IoError("trailing bytes in checkpoint file");
    return state;
}

}  // namespace ratecast
