#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "ikan/tensor.hpp"

namespace ikan {

// A tensor to perturb and the tensor holding its analytic gradient.
struct GradTarget {
    Tensor* value;
    const Tensor* grad;
};

inline std::vector<GradTarget> grad_targets(const ParamRefs& params) {
    std::vector<GradTarget> out;
    for (auto* p : params) out.push_back({&p->value, &p->grad});
    return out;
}

struct GradCheckOptions {
    double eps = 1e-5;
    // Coordinates sampled per target; 0 checks every coordinate.
    std::size_t samples_per_target = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t coordinates_checked = 0;
};

// Compares analytic gradients against central differences.
//
// `loss` runs a forward pass and returns a scalar. `fill_gradients` must zero
// and then populate every target's analytic gradient for the current values.
// The relative error of a coordinate is |a-n| / max(|a|, |n|, 1e-8).
inline GradCheckResult grad_check(const std::function<double()>& loss,
                                  const std::function<void()>& fill_gradients,
                                  const std::vector<GradTarget>& targets,
                                  const GradCheckOptions& opts = {}) {
    if (!(opts.eps >= 1e-6 && opts.eps <= 1e-4))
        throw RangeError("finite-difference step must lie in [1e-6, 1e-4]");
    fill_gradients();
    std::vector<Tensor> analytic;
    for (const auto& t : targets) analytic.push_back(*t.grad);

    std::mt19937_64 rng(opts.seed);
    GradCheckResult result;
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        Tensor& value = *targets[ti].value;
        std::vector<std::size_t> coords(value.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opts.samples_per_target && coords.size() > opts.samples_per_target) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.samples_per_target);
        }
        for (std::size_t i : coords) {
            const double saved = value[i];
            value[i] = saved + opts.eps;
            const double plus = loss();
            value[i] = saved - opts.eps;
            const double minus = loss();
            value[i] = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus))
                throw NumericError("non-finite loss during finite differencing");
            const double numeric = (plus - minus) / (2.0 * opts.eps);
            const double a = analytic[ti][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
            ++result.coordinates_checked;
        }
    }
    return result;
}

}  // namespace ikan
