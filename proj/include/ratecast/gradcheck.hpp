#pragma once

// Central finite differences as an independent oracle for the reverse-mode
// path. The checker only re-evaluates the loss closure with perturbed leaf
// values; it never inspects the tape. Run it on Tensor<double> graphs.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ratecast/rng.hpp"
#include "ratecast/tensor.hpp"

namespace ratecast {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::int64_t coords_checked = 0;

    bool within(double tol) const { return max_rel_err < tol; }
};

// f() must rebuild the loss from the given leaves each call and return a
// scalar. Leaves must be tracked. h is the central step; coordinates per leaf
// can be capped (0 = check all) with a deterministic sample.
template <typename Real, typename F>
GradCheckReport gradient_check(F&& f, std::vector<Tensor<Real>> leaves, double h = 1e-5,
                               std::int64_t max_coords_per_leaf = 0,
                               std::uint64_t coord_seed = 0, double denom_floor = 1e-6) {
    for (auto& leaf : leaves) leaf.zero_grad();
    auto loss = f();
    backward(loss);

    GradCheckReport report;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        auto vals = leaf.mutable_vals();
        auto grads = leaf.grad();
        std::vector<std::int64_t> coords;
        const std::int64_t n = leaf.size();
        if (max_coords_per_leaf <= 0 || max_coords_per_leaf >= n) {
            coords.resize(n);
            for (std::int64_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            Rng rng(derive_seed(coord_seed, "gradcheck-coords", li));
            for (std::int64_t i = 0; i < max_coords_per_leaf; ++i)
                coords.push_back(rng.uniform_int(int(n)));
        }
        NoGradGuard no_grad;
        for (std::int64_t i : coords) {
            const Real x = vals[i];
            vals[i] = x + Real(h);
            const double fp = double(f().item());
            vals[i] = x - Real(h);
            const double fm = double(f().item());
            vals[i] = x;
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = double(grads[i]);
            const double abs_err = std::abs(ad - fd);
            const double denom = std::max({std::abs(ad), std::abs(fd), denom_floor});
            report.max_abs_err = std::max(report.max_abs_err, abs_err);
            report.max_rel_err = std::max(report.max_rel_err, abs_err / denom);
            ++report.coords_checked;
        }
    }
    return report;
}

}  // namespace ratecast
