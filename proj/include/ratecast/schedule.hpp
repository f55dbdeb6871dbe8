// Flow-matching time machinery: logit-normal timestep sampling, the shift map
// that concentrates integration steps at high noise, linear interpolants, and
// the descending time grid used by the Euler sampler.
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "ratecast/errors.hpp"
#include "ratecast/rng.hpp"
#include "ratecast/tensor.hpp"

namespace ratecast {

struct NoiseSchedule {
    double m_loc = 0.0;
    double s_scale = 1.0;
    double sigma_shift = 3.0;

    void validate() const {
        check_config(s_scale > 0.0, "noise schedule scale must be positive");
        check_config(sigma_shift >= 1.0, "sigma shift must be >= 1");
    }
};

// u -> sigma*u / (1 + (sigma-1)*u). Strictly increasing on [0,1], fixes 0 and
// 1, identity at sigma=1; sigma>1 pushes mass toward t=1 (high noise).
inline double sigma_shift_map(double u, double sigma) {
    return sigma * u / (1.0 + (sigma - 1.0) * u);
}

// Density of sigmoid(Normal(m, s)) at t in (0,1).
inline double logit_normal_pdf(double t, double m_loc = 0.0, double s_scale = 1.0) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double logit = std::log(t / (1.0 - t));
    const double z = (logit - m_loc) / s_scale;
    return std::exp(-0.5 * z * z) / (s_scale * std::sqrt(2.0 * std::numbers::pi) * t * (1.0 - t));
}

// Pre-shift draw: sigmoid of a gaussian. Exactly logit-normal.
inline double sample_t_raw(const NoiseSchedule& sched, Rng& rng) {
    const double u = sched.m_loc + sched.s_scale * rng.gaussian();
    return 1.0 / (1.0 + std::exp(-u));
}

inline double sample_t(const NoiseSchedule& sched, Rng& rng) {
    sched.validate();
    return sigma_shift_map(sample_t_raw(sched, rng), sched.sigma_shift);
}

inline double sample_t(const NoiseSchedule& sched, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_t(sched, rng);
}

// z_t = (1-t) z0 + t z1, on the tape.
template <typename Real>
Tensor<Real> interpolate(const Tensor<Real>& z0, const Tensor<Real>& z1, double t) {
    check_contract(z0.shape() == z1.shape(), "interpolate endpoints must share a shape, got " +
                                                 shape_str(z0.shape()) + " vs " +
                                                 shape_str(z1.shape()));
    check_contract(t >= 0.0 && t <= 1.0, "interpolation time outside [0,1]");
    return add(scale(z0, Real(1.0 - t)), scale(z1, Real(t)));
}

// Descending integration grid: t_k = shift(k/steps) for k = steps .. 0, so
// grid.front() == 1 and grid.back() == 0.
inline std::vector<double> time_grid(int steps, double sigma) {
    check_contract(steps >= 1, "time grid needs at least one step");
    std::vector<double> grid(std::size_t(steps) + 1);
    for (int k = 0; k <= steps; ++k)
        grid[std::size_t(k)] = sigma_shift_map(double(steps - k) / steps, sigma);
    return grid;
}

}  // namespace ratecast
