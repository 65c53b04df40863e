#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ikan/errors.hpp"

namespace ikan {

// Per-class F1 averaged with weights equal to each class's support in y_true.
// Classes that never occur in y_true carry zero weight.
inline double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size())
        throw DimensionError("label lists differ in length: " + std::to_string(y_true.size()) + " vs " +
                             std::to_string(y_pred.size()));
    if (y_true.empty()) throw EmptyDataError("weighted F1 of an empty label list");
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0, support = 0;
    };
    std::map<int, Counts> per_class;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        per_class[y_true[i]].support++;
        if (y_true[i] == y_pred[i]) {
            per_class[y_true[i]].tp++;
        } else {
            per_class[y_true[i]].fn++;
            per_class[y_pred[i]].fp++;
        }
    }
    double total = 0.0;
    for (const auto& [label, c] : per_class) {
        if (c.support == 0) continue;
        const std::size_t denom = 2 * c.tp + c.fp + c.fn;
        const double f1 = denom ? 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom) : 0.0;
        total += f1 * static_cast<double>(c.support);
    }
    return total / static_cast<double>(y_true.size());
}

// P(i,k): performance on task i after training through task k, for i <= k.
class ResultMatrix {
public:
    ResultMatrix() = default;
    explicit ResultMatrix(std::size_t n_tasks) : n_(n_tasks), cells_(n_tasks * n_tasks) {
        if (n_tasks == 0) throw RangeError("result matrix needs at least one task");
    }

    std::size_t n_tasks() const { return n_; }

    void set(std::size_t task, std::size_t stage, double value) {
        check(task, stage);
        if (!(value >= 0.0 && value <= 1.0))
            throw RangeError("performance " + std::to_string(value) + " outside [0,1]");
        cells_[task * n_ + stage] = value;
    }

    bool has(std::size_t task, std::size_t stage) const {
        return task <= stage && stage < n_ && cells_[task * n_ + stage].has_value();
    }

    double at(std::size_t task, std::size_t stage) const {
        check(task, stage);
        const auto& v = cells_[task * n_ + stage];
        if (!v)
            throw StateError("P(" + std::to_string(task) + "," + std::to_string(stage) + ") has not been recorded");
        return *v;
    }

    std::optional<double> get(std::size_t task, std::size_t stage) const {
        if (task >= n_ || stage >= n_) return std::nullopt;
        return cells_[task * n_ + stage];
    }

    bool column_complete(std::size_t stage) const {
        for (std::size_t i = 0; i <= stage; ++i)
            if (!has(i, stage)) return false;
        return true;
    }

    bool complete() const {
        for (std::size_t k = 0; k < n_; ++k)
            if (!column_complete(k)) return false;
        return true;
    }

    friend bool operator==(const ResultMatrix&, const ResultMatrix&) = default;

private:
    void check(std::size_t task, std::size_t stage) const {
        if (task >= n_ || stage >= n_)
            throw RangeError("cell (" + std::to_string(task) + "," + std::to_string(stage) + ") outside a " +
                             std::to_string(n_) + "-task matrix");
        if (task > stage)
            throw RangeError("P(" + std::to_string(task) + "," + std::to_string(stage) +
                             ") lies above the diagonal");
    }

    std::size_t n_ = 0;
    std::vector<std::optional<double>> cells_;
};

// Mean over tasks seen so far of the column for `stage`.
inline double stage_performance(const ResultMatrix& m, std::size_t stage) {
    if (!m.column_complete(stage))
        throw StateError("column " + std::to_string(stage) + " of the result matrix is incomplete");
    double sum = 0.0;
    for (std::size_t i = 0; i <= stage; ++i) sum += m.at(i, stage);
    return sum / static_cast<double>(stage + 1);
}

inline double last_performance(const ResultMatrix& m) { return stage_performance(m, m.n_tasks() - 1); }

// Average incremental performance: mean of stage_performance over all stages.
inline double aip(const ResultMatrix& m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < m.n_tasks(); ++k) sum += stage_performance(m, k);
    return sum / static_cast<double>(m.n_tasks());
}

// F(T_j, T_i) = max_{k in [j, i-1]} P(j,k) - P(j,i); negative values are kept.
inline double forgetting_of(const ResultMatrix& m, std::size_t j, std::size_t i) {
    if (j >= i) throw RangeError("forgetting of task " + std::to_string(j) + " after task " + std::to_string(i));
    double best = m.at(j, j);
    for (std::size_t k = j + 1; k < i; ++k) best = std::max(best, m.at(j, k));
    return best - m.at(j, i);
}

// Aggregate forgetting after training through task i (i >= 1): the mean of
// F(T_j, T_i) over the i earlier tasks.
inline double forgetting(const ResultMatrix& m, std::size_t i) {
    if (i == 0) throw RangeError("forgetting is undefined after the first task");
    if (i >= m.n_tasks()) throw RangeError("task " + std::to_string(i) + " outside the result matrix");
    double sum = 0.0;
    for (std::size_t j = 0; j < i; ++j) sum += forgetting_of(m, j, i);
    return sum / static_cast<double>(i);
}

// F_1 .. F_{K-1}.
inline std::vector<double> forgetting_curve(const ResultMatrix& m) {
    std::vector<double> out;
    for (std::size_t i = 1; i < m.n_tasks(); ++i) out.push_back(forgetting(m, i));
    return out;
}

// ref[i] - P(i,i) per task.
inline std::vector<double> intransigence_per_task(const ResultMatrix& m, std::span<const double> reference) {
    if (reference.size() != m.n_tasks())
        throw DimensionError(std::to_string(reference.size()) + " reference scores for " +
                             std::to_string(m.n_tasks()) + " tasks");
    std::vector<double> out;
    for (std::size_t i = 0; i < m.n_tasks(); ++i) out.push_back(reference[i] - m.at(i, i));
    return out;
}

inline double intransigence(const ResultMatrix& m, std::span<const double> reference) {
    const auto per_task = intransigence_per_task(m, reference);
    double sum = 0.0;
    for (double v : per_task) sum += v;
    return sum / static_cast<double>(per_task.size());
}

}  // namespace ikan
