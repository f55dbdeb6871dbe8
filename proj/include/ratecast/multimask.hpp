#pragma once

// Frame conditioning via channel concatenation: the denoiser input carries
// [noisy latent (D) | zero-padded clean condition (D) | mask (1)] per frame.
// One mechanism covers text-to-video (no entries), image-to-video (entry at
// position 0), first-last, refinement anchors and continuation overlaps.

#include <map>
#include <string>
#include <vector>

#include "ratecast/errors.hpp"
#include "ratecast/rng.hpp"
#include "ratecast/tensor.hpp"

namespace ratecast {

// 0-based frame position -> clean frame of D values.
template <typename Real>
struct MultiMaskCondition {
    std::map<int, std::vector<Real>> entries;

    bool empty() const { return entries.empty(); }
};

// Shot boundaries as sorted 0-based frame positions where a new shot begins.
// Position 0 is implicit, so boundaries {10} over 24 frames means shots
// [0, 10) and [10, 24).
struct ShotLayout {
    int n_frames = 0;
    std::vector<int> boundaries;

    int shot_count() const { return int(boundaries.size()) + 1; }

    int shot_of(int position) const {
        int s = 0;
        for (int b : boundaries)
            if (position >= b) ++s;
        return s;
    }

    void validate() const {
        check_contract(n_frames > 0, "shot layout needs a positive frame count");
        int prev = 0;
        for (int b : boundaries) {
            check_contract(b > prev && b < n_frames,
                           "shot boundary " + std::to_string(b) +
                               " must be strictly inside (0, " + std::to_string(n_frames) + ")");
            prev = b;
        }
    }
};

template <typename Real>
struct ConditionedInput {
    Tensor<Real> channels;  // [T x (2D + 1)]
};

// Assembles the conditioned denoiser input. The condition block is zero
// outside conditioned rows and the mask channel is exactly 0 or 1. The result
// is linear in the noisy argument: the condition and mask blocks do not
// depend on it.
template <typename Real>
ConditionedInput<Real> build_conditioned_input(const Tensor<Real>& noisy,
                                               const MultiMaskCondition<Real>& cond) {
    check_dim(noisy.rank() == 2,
              "conditioned input needs rank-2 noisy frames, got " + shape_str(noisy.shape()));
    const int t = noisy.shape()[0];
    const int d = noisy.shape()[1];
    std::vector<Real> cond_block(std::int64_t(t) * d, Real(0));
    std::vector<Real> mask(t, Real(0));
    for (const auto& [pos, frame] : cond.entries) {
        check_contract(pos >= 0 && pos < t,
                       "condition position " + std::to_string(pos) + " outside [0, " +
                           std::to_string(t) + ")");
        check_dim(int(frame.size()) == d,
                  "condition frame at position " + std::to_string(pos) + " has " +
                      std::to_string(frame.size()) + " channels, expected " + std::to_string(d));
        std::copy(frame.begin(), frame.end(), cond_block.begin() + std::int64_t(pos) * d);
        mask[pos] = Real(1);
    }
    auto cond_t = Tensor<Real>::from({t, d}, std::move(cond_block));
    auto mask_t = Tensor<Real>::from({t, 1}, std::move(mask));
    return {concat_channels(noisy, cond_t, mask_t)};
}

// Draws the training condition set: a fraction f ~ U[0, 0.15] of the clip,
// floor(f * T) distinct positions, uniform without replacement.
inline std::vector<int> sample_condition_positions(int total_frames, Rng& rng,
                                                   double max_fraction = 0.15) {
    check_contract(total_frames > 0, "condition sampling needs a positive frame count");
    const double f = rng.uniform(0.0, max_fraction);
    const int count = int(f * total_frames);
    std::vector<int> all(total_frames);
    for (int i = 0; i < total_frames; ++i) all[i] = i;
    for (int i = 0; i < count; ++i) {
        int j = i + rng.uniform_int(total_frames - i);
        std::swap(all[i], all[j]);
    }
    std::vector<int> out(all.begin(), all.begin() + count);
    std::sort(out.begin(), out.end());
    return out;
}

template <typename Real>
MultiMaskCondition<Real> sample_training_condition(const std::vector<Real>& clean_frames, int t,
                                                   int d, Rng& rng, double max_fraction = 0.15) {
    check_dim(std::int64_t(clean_frames.size()) == std::int64_t(t) * d,
              "clean frame block size does not match T x D");
    MultiMaskCondition<Real> cond;
    for (int pos : sample_condition_positions(t, rng, max_fraction))
        cond.entries[pos] = std::vector<Real>(clean_frames.begin() + std::int64_t(pos) * d,
                                              clean_frames.begin() + std::int64_t(pos + 1) * d);
    return cond;
}

// Multi-shot augmentation: picks a nonempty random subset of shots and
// removes every condition entry falling inside them, forcing the model to
// produce unconditioned shot content. Single-shot layouts pass through.
template <typename Real>
MultiMaskCondition<Real> drop_shot_conditions(const MultiMaskCondition<Real>& cond,
                                              const ShotLayout& layout, Rng& rng) {
    layout.validate();
    const int shots = layout.shot_count();
    if (shots == 1) return cond;
    check_contract(shots <= 62, "too many shots for subset selection");
    const std::uint64_t subsets = (std::uint64_t(1) << shots) - 1;
    const std::uint64_t selected = 1 + rng.next_u64() % subsets;
    MultiMaskCondition<Real> out;
    for (const auto& [pos, frame] : cond.entries) {
        check_contract(pos >= 0 && pos < layout.n_frames,
                       "condition position " + std::to_string(pos) + " outside layout of " +
                           std::to_string(layout.n_frames) + " frames");
        if (!(selected >> layout.shot_of(pos) & 1)) out.entries[pos] = frame;
    }
    return out;
}

// Replaces conditioned rows of a [T x D] frame block with their clean values,
// bitwise. Applied after each denoising stage so anchors stay frozen.
template <typename Real>
std::vector<Real> overwrite_anchors(std::vector<Real> frames, int t, int d,
                                    const MultiMaskCondition<Real>& cond) {
    check_dim(std::int64_t(frames.size()) == std::int64_t(t) * d,
              "frame block size does not match T x D");
    for (const auto& [pos, frame] : cond.entries) {
        check_contract(pos >= 0 && pos < t,
                       "anchor position " + std::to_string(pos) + " outside [0, " +
                           std::to_string(t) + ")");
        check_dim(int(frame.size()) == d, "anchor frame width mismatch at position " +
                                              std::to_string(pos));
        std::copy(frame.begin(), frame.end(), frames.begin() + std::int64_t(pos) * d);
    }
    return frames;
}

}  // namespace ratecast
