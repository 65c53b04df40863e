#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "ikan/tensor.hpp"

namespace ikan {

// Per-feature min-max statistics fitted on one task's training features.
struct Normalizer {
    std::vector<double> min;
    std::vector<double> max;

    std::size_t dim() const { return min.size(); }
    friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

inline Normalizer fit_normalizer(const Tensor& features) {
    if (features.rank() != 2) throw DimensionError("normalizer expects (M,D) but got " + shape_str(features.shape()));
    const std::size_t rows = features.dim(0), cols = features.dim(1);
    if (rows == 0) throw EmptyDataError("cannot fit a normalizer on zero rows");
    Normalizer n{std::vector<double>(features.row(0).begin(), features.row(0).end()),
                 std::vector<double>(features.row(0).begin(), features.row(0).end())};
    for (std::size_t r = 1; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
            n.min[j] = std::min(n.min[j], features.at(r, j));
            n.max[j] = std::max(n.max[j], features.at(r, j));
        }
    }
    return n;
}

// (x - min) / (max - min), clamped to [0,1]; constant features map to 0.5.
// `clamp_events`, when given, counts values that fell outside the fitted range.
inline Tensor normalize(const Normalizer& norm, const Tensor& features, std::size_t* clamp_events = nullptr) {
    if (features.rank() != 2 || features.dim(1) != norm.dim())
        throw DimensionError("normalizer fitted for " + std::to_string(norm.dim()) + " features got " +
                             shape_str(features.shape()));
    Tensor out(features.shape());
    const std::size_t cols = norm.dim();
    for (std::size_t e = 0; e < features.size(); ++e) {
        const std::size_t j = e % cols;
        const double span = norm.max[j] - norm.min[j];
        if (span <= 0.0) {
            out[e] = 0.5;
            continue;
        }
        const double v = (features[e] - norm.min[j]) / span;
        if ((v < 0.0 || v > 1.0) && clamp_events) ++*clamp_events;
        out[e] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

struct RedistributionConfig {
    std::size_t total_tasks = 6;
    double beta = 4.0;

    void check_task(std::size_t task_id) const {
        if (task_id >= total_tasks)
            throw TaskRangeError("task id " + std::to_string(task_id) + " outside [0," +
                                 std::to_string(total_tasks) + ")");
    }
};

// F_re = task_id / N + f_norm / (N + beta), elementwise.
inline double redistribute(const RedistributionConfig& cfg, std::size_t task_id, double f_norm) {
    cfg.check_task(task_id);
    const auto n = static_cast<double>(cfg.total_tasks);
    return static_cast<double>(task_id) / n + f_norm / (n + cfg.beta);
}

inline Tensor redistribute(const RedistributionConfig& cfg, std::size_t task_id, const Tensor& f_norm) {
    cfg.check_task(task_id);
    Tensor out(f_norm.shape());
    for (std::size_t e = 0; e < f_norm.size(); ++e) out[e] = redistribute(cfg, task_id, f_norm[e]);
    return out;
}

// The image of [0,1] under redistribute for this task.
inline std::pair<double, double> task_interval(const RedistributionConfig& cfg, std::size_t task_id) {
    return {redistribute(cfg, task_id, 0.0), redistribute(cfg, task_id, 1.0)};
}

}  // namespace ikan
