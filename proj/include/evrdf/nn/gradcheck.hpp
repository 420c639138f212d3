#pragma once

// Central finite-difference check of backward().

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "evrdf/nn/model.hpp"

namespace evrdf::nn {

struct GradCheckOptions {
    double eps = 1e-5;
    std::size_t coords_per_tensor = 200;  ///< all coordinates when the tensor is smaller
    std::uint64_t seed = 7;
    /// Magnitude below which differences are judged on an absolute scale.
    double floor = 1e-8;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  ///< coordinates whose perturbation crosses a ReLU/pool/L1 kink
};

inline double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares backward() against (L(w + eps) - L(w - eps)) / 2 eps on a random
/// subset of coordinates, dropout off. Coordinates where either perturbation
/// changes the activation pattern are skipped: the loss is not differentiable
/// across those kinks.
inline GradCheckResult gradient_check(const ModelParams& params, const Matrix& x, const std::vector<int>& y,
                                      const Regularization& reg, const GradCheckOptions& opt = {}) {
    ModelParams p = params;
    const auto base_state = forward_state(p, x, false, 0);
    const Gradients g = backward(p, base_state, y, reg);
    const std::uint64_t base_sig = activation_signature(p, x);
    const auto eval = [&]() { return loss(forward(p, x, false, 0), y, p, reg); };

    Rng rng(opt.seed);
    GradCheckResult r;
    for (std::size_t ti = 0; ti < p.tensors.size(); ++ti) {
        auto& val = p.tensors[ti].value;
        const auto n = static_cast<std::size_t>(val.size());
        std::vector<std::size_t> coords(n);
        for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        if (n > opt.coords_per_tensor) {
            shuffle(coords, rng);
            coords.resize(opt.coords_per_tensor);
        }
        for (auto c : coords) {
            double& w = val.data()[c];
            const double w0 = w;
            if (p.tensors[ti].is_weight && reg.l1 != 0.0 && std::abs(w0) <= opt.eps) {
                ++r.skipped;
                continue;
            }
            w = w0 + opt.eps;
            const bool kink_up = activation_signature(p, x) != base_sig;
            const double lp = eval();
            w = w0 - opt.eps;
            const bool kink_dn = activation_signature(p, x) != base_sig;
            const double lm = eval();
            w = w0;
            if (kink_up || kink_dn) {
                ++r.skipped;
                continue;
            }
            const double numeric = (lp - lm) / (2.0 * opt.eps);
            const double analytic = g[ti].data()[c];
            const double err = relative_error(analytic, numeric, opt.floor);
            ++r.checked;
            if (r.worst_tensor.empty() || err > r.max_rel_error) {
                r.max_rel_error = err;
                r.worst_tensor = p.tensors[ti].name;
                r.worst_analytic = analytic;
                r.worst_numeric = numeric;
            }
        }
    }
    return r;
}

/// Builds `spec` from `seed` and checks it on `x`/`y` with the spec's own
/// regularization.
inline GradCheckResult gradient_check(const ModelSpec& spec, const Matrix& x, const std::vector<int>& y,
                                      std::uint64_t seed, const GradCheckOptions& opt = {}) {
    return gradient_check(build(spec, seed), x, y, spec_regularization(spec), opt);
}

}  // namespace evrdf::nn
