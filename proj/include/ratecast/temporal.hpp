#pragma once

// Frame-rate levels, temporal index plans and rotary position encoding.
//
// Level i covers every 2^i-th frame. Positions are 1-based multiples of the
// stride, so the last frame of a clip belongs to every level and coarser
// position sets nest inside finer ones. Rotary indices are real-valued; only
// index differences influence attention, which is what makes a randomized
// common offset a sound training augmentation.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ratecast/errors.hpp"
#include "ratecast/rng.hpp"
#include "ratecast/tensor.hpp"

namespace ratecast {

inline constexpr double kDefaultTMax = 1024.0;
inline constexpr double kRopeThetaBase = 10000.0;

struct RateLevel {
    int level = 0;

    int stride() const { return 1 << level; }
    double fps(double base_fps) const { return base_fps / stride(); }
};

struct TemporalIndexPlan {
    double t_start = 0.0;
    double t_max = kDefaultTMax;
    int level = 0;
    std::vector<double> indices;
};

struct RopeParams {
    double theta_base = kRopeThetaBase;
    int head_dim = 16;
};

// 1-based frame positions of level i inside a clip of T frames:
// (m, 2m, ..., T) with m = 2^i.
inline std::vector<int> subsample_indices(int total_frames, int level_i) {
    check_contract(total_frames > 0, "subsample_indices needs a positive frame count");
    check_contract(level_i >= 0, "subsample_indices needs a non-negative level");
    const int m = 1 << level_i;
    check_contract(total_frames % m == 0,
                   "frame count " + std::to_string(total_frames) +
                       " is not divisible by stride " + std::to_string(m));
    std::vector<int> out(total_frames / m);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = int(j + 1) * m;
    return out;
}

// indices[j] = t_start + j * 2^level for j = 0..n_frames-1.
inline TemporalIndexPlan assign_indices(int n_frames, int level_i, double t_start,
                                        double t_max = kDefaultTMax) {
    check_contract(n_frames > 0, "assign_indices needs a positive frame count");
    check_contract(level_i >= 0, "assign_indices needs a non-negative level");
    check_contract(t_start >= 0.0 && t_start <= t_max,
                   "t_start " + std::to_string(t_start) + " outside [0, " +
                       std::to_string(t_max) + "]");
    TemporalIndexPlan plan;
    plan.t_start = t_start;
    plan.t_max = t_max;
    plan.level = level_i;
    plan.indices.resize(n_frames);
    const double stride = double(1 << level_i);
    for (int j = 0; j < n_frames; ++j) plan.indices[j] = t_start + j * stride;
    return plan;
}

inline double sample_t_start(double t_max, Rng& rng) {
    check_contract(t_max > 0.0, "sample_t_start needs a positive t_max");
    return rng.uniform(0.0, t_max);
}

// Rotation angle of pair k at a given index.
inline double rope_angle(double index, int pair_k, const RopeParams& params) {
    return index * std::pow(params.theta_base, -2.0 * pair_k / params.head_dim);
}

// Rotates consecutive pairs (v[2k], v[2k+1]) by rope_angle(index, k).
template <typename Real>
std::vector<Real> rope_apply(const std::vector<Real>& vec, double index,
                             const RopeParams& params) {
    check_dim(int(vec.size()) == params.head_dim,
              "rope_apply vector length " + std::to_string(vec.size()) +
                  " does not match head_dim " + std::to_string(params.head_dim));
    check_contract(params.head_dim % 2 == 0, "rope head_dim must be even");
    std::vector<Real> out(vec.size());
    for (int k = 0; 2 * k < params.head_dim; ++k) {
        const double a = rope_angle(index, k, params);
        const Real c = Real(std::cos(a));
        const Real s = Real(std::sin(a));
        out[2 * k] = vec[2 * k] * c - vec[2 * k + 1] * s;
        out[2 * k + 1] = vec[2 * k] * s + vec[2 * k + 1] * c;
    }
    return out;
}

// Cosine/sine tables with each pair slot duplicated, shaped [T x head_dim],
// so a tensor rotation is x * cos + rotate_pairs(x) * sin. Table entries are
// plain leaves; building them adds no tracked multiply-adds.
template <typename Real>
struct RopeTables {
    Tensor<Real> cos_t;
    Tensor<Real> sin_t;
};

template <typename Real>
RopeTables<Real> rope_tables(const std::vector<double>& indices, const RopeParams& params) {
    check_contract(params.head_dim % 2 == 0, "rope head_dim must be even");
    const int t = int(indices.size());
    const int d = params.head_dim;
    std::vector<Real> cv(std::int64_t(t) * d), sv(std::int64_t(t) * d);
    for (int i = 0; i < t; ++i) {
        for (int k = 0; 2 * k < d; ++k) {
            const double a = rope_angle(indices[i], k, params);
            cv[std::int64_t(i) * d + 2 * k] = Real(std::cos(a));
            cv[std::int64_t(i) * d + 2 * k + 1] = Real(std::cos(a));
            sv[std::int64_t(i) * d + 2 * k] = Real(std::sin(a));
            sv[std::int64_t(i) * d + 2 * k + 1] = Real(std::sin(a));
        }
    }
    return {Tensor<Real>::from({t, d}, std::move(cv)), Tensor<Real>::from({t, d}, std::move(sv))};
}

// Differentiable rotation of every row of x [T x head_dim] by its row's angle.
template <typename Real>
Tensor<Real> rope_rotate(const Tensor<Real>& x, const RopeTables<Real>& tables) {
    return add(mul(x, tables.cos_t), mul(rotate_pairs(x), tables.sin_t));
}

}  // namespace ratecast
