#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ikan/errors.hpp"

namespace ikan {

// Largest spline order the fixed-size scratch buffers support.
inline constexpr std::size_t kMaxSplineOrder = 10;

// Uniform knot vector over [range_min - k*h, range_max + k*h], h = width/G.
//
// There are G + 2k + 1 knots and G + k basis functions of degree k. Basis m
// is supported on [knots[m], knots[m+k+1]].
struct KnotVector {
    double range_min = 0.0;
    double range_max = 1.0;
    std::size_t grid_number = 1;
    std::size_t order = 0;
    std::vector<double> knots;

    std::size_t basis_count() const noexcept { return grid_number + order; }
    double spacing() const noexcept { return (range_max - range_min) / static_cast<double>(grid_number); }
    double clamp(double x) const noexcept { return std::clamp(x, range_min, range_max); }
};

inline KnotVector make_knots(double range_min, double range_max, std::size_t grid_number, std::size_t order) {
    if (!(range_min < range_max))
        throw RangeError("grid range [" + std::to_string(range_min) + ", " + std::to_string(range_max) +
                         "] is degenerate");
    if (grid_number == 0) throw RangeError("grid number must be at least 1");
    if (order > kMaxSplineOrder) throw RangeError("spline order above " + std::to_string(kMaxSplineOrder));
    KnotVector kv{range_min, range_max, grid_number, order, {}};
    const double width = range_max - range_min;
    const auto g = static_cast<double>(grid_number);
    const auto k = static_cast<long>(order);
    const std::size_t n = grid_number + 2 * order + 1;
    kv.knots.resize(n);
    // Each knot is computed directly (not accumulated) so that interior knots
    // land on the same doubles as i/G-style interval endpoints.
    for (std::size_t m = 0; m < n; ++m)
        kv.knots[m] = range_min + (static_cast<double>(static_cast<long>(m) - k) * width) / g;
    return kv;
}

// Knot span j with knots[j] <= x < knots[j+1], restricted to the interior
// spans [k, G+k-1]; x == range_max maps to the last interior span.
inline std::size_t find_span(const KnotVector& kv, double x) {
    const std::size_t lo = kv.order, hi = kv.grid_number + kv.order - 1;
    const double pos = (x - kv.range_min) / kv.spacing();
    long guess = static_cast<long>(std::floor(pos)) + static_cast<long>(kv.order);
    std::size_t j = static_cast<std::size_t>(std::clamp<long>(guess, static_cast<long>(lo), static_cast<long>(hi)));
    while (j > lo && x < kv.knots[j]) --j;
    while (j < hi && x >= kv.knots[j + 1]) ++j;
    return j;
}

namespace detail {

// Cox-de Boor triangle: degree-`degree` bases j-degree..j at x, written to out.
inline void local_basis(const std::vector<double>& t, std::size_t span, std::size_t degree, double x,
                        double* out) {
    std::array<double, kMaxSplineOrder + 1> left{}, right{};
    out[0] = 1.0;
    for (std::size_t r = 1; r <= degree; ++r) {
        left[r] = x - t[span + 1 - r];
        right[r] = t[span + r] - x;
        double saved = 0.0;
        for (std::size_t s = 0; s < r; ++s) {
            const double temp = out[s] / (right[s + 1] + left[r - s]);
            out[s] = saved + right[s + 1] * temp;
            saved = left[r - s] * temp;
        }
        out[r] = saved;
    }
}

}  // namespace detail

// Nonzero basis values (and first derivatives) at a single point.
//
// values[r] and derivs[r] belong to basis index first + r, r = 0..k. The
// point is clamped to the grid range before evaluation.
inline std::size_t eval_local_basis(const KnotVector& kv, double x, double* values, double* derivs) {
    x = kv.clamp(x);
    const std::size_t k = kv.order;
    const std::size_t span = find_span(kv, x);
    detail::local_basis(kv.knots, span, k, x, values);
    if (derivs) {
        if (k == 0) {
            derivs[0] = 0.0;
        } else {
            // N'_{m,k} = k * (N_{m,k-1}/(t_{m+k}-t_m) - N_{m+1,k-1}/(t_{m+k+1}-t_{m+1}))
            std::array<double, kMaxSplineOrder + 1> lower{};
            detail::local_basis(kv.knots, span, k - 1, x, lower.data());
            const auto& t = kv.knots;
            const std::size_t first = span - k;
            const double kd = static_cast<double>(k);
            for (std::size_t r = 0; r <= k; ++r) {
                const std::size_t m = first + r;
                // lower[q] is basis span-(k-1)+q of degree k-1, i.e. index first+1+q.
                const double a = r >= 1 ? lower[r - 1] / (t[m + k] - t[m]) : 0.0;
                const double b = r < k ? lower[r] / (t[m + k + 1] - t[m + 1]) : 0.0;
                derivs[r] = kd * (a - b);
            }
        }
    }
    return span - k;
}

// All G + k basis values at x (clamped into the grid range).
inline std::vector<double> bspline_basis(const KnotVector& kv, double x) {
    std::vector<double> out(kv.basis_count(), 0.0);
    std::array<double, kMaxSplineOrder + 1> local{};
    const std::size_t first = eval_local_basis(kv, x, local.data(), nullptr);
    for (std::size_t r = 0; r <= kv.order; ++r) out[first + r] = local[r];
    return out;
}

// Indices of every basis function that can be nonzero somewhere in [lo, hi].
//
// Training on inputs confined to [lo, hi] (without a global residual branch)
// produces gradients only on these coefficients.
inline std::vector<std::size_t> locality_footprint(const KnotVector& kv, double lo, double hi) {
    if (lo > hi)
        throw RangeError("interval [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is inverted");
    lo = kv.clamp(lo);
    hi = kv.clamp(hi);
    std::vector<std::size_t> out;
    if (kv.order == 0) {
        for (std::size_t m = find_span(kv, lo); m <= find_span(kv, hi); ++m) out.push_back(m);
        return out;
    }
    // Degree >= 1 bases vanish at both support ends, so the test is open.
    for (std::size_t m = 0; m < kv.basis_count(); ++m)
        if (kv.knots[m] < hi && kv.knots[m + kv.order + 1] > lo) out.push_back(m);
    return out;
}

}  // namespace ikan
