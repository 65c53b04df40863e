#pragma once

#include <compare>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ikan/classifier.hpp"
#include "ikan/encoder.hpp"
#include "ikan/redistribution.hpp"

namespace ikan {

// Fixed classifier output width: the largest class count among the tasks.
inline constexpr std::size_t kClassifierOutputs = 13;

struct GlobalLabel {
    std::size_t value = 0;
    friend auto operator<=>(const GlobalLabel&, const GlobalLabel&) = default;
};

// global = task_id * n_out + local
inline GlobalLabel globalize(std::size_t task_id, std::size_t local, std::size_t n_out = kClassifierOutputs) {
    if (local >= n_out)
        throw RangeError("local class " + std::to_string(local) + " outside [0," + std::to_string(n_out) + ")");
    return {task_id * n_out + local};
}

inline std::pair<std::size_t, std::size_t> localize(GlobalLabel g, std::size_t n_out = kClassifierOutputs) {
    return {g.value / n_out, g.value % n_out};
}

struct ShapeKey {
    std::size_t window = 0;
    std::size_t channels = 0;
    friend auto operator<=>(const ShapeKey&, const ShapeKey&) = default;
};

inline std::string to_string(const ShapeKey& k) {
    return "(" + std::to_string(k.window) + "," + std::to_string(k.channels) + ")";
}

struct TaskDescriptor {
    std::size_t task_id = 0;  // assigned on registration
    std::string name;
    ShapeKey shape;
    std::size_t class_count = 0;
    bool manual_id = false;
    std::shared_ptr<Encoder> encoder;
    Normalizer normalizer;
};

// Registry of learned tasks: identifies a task from its input shape and turns
// raw windows into classifier inputs through the task's frozen encoder,
// normalizer and (for iKAN) the redistribution layer.
class TaskRegistry {
public:
    explicit TaskRegistry(RedistributionConfig cfg, bool redistribute_features = true,
                          std::size_t n_out = kClassifierOutputs)
        : cfg_(cfg), redistribute_(redistribute_features), n_out_(n_out) {}

    const RedistributionConfig& redistribution() const { return cfg_; }
    bool redistributes() const { return redistribute_; }
    std::size_t output_dim() const { return n_out_; }
    std::size_t size() const { return tasks_.size(); }
    const TaskDescriptor& task(std::size_t id) const {
        if (id >= tasks_.size()) throw UnknownTaskError("no task with id " + std::to_string(id));
        return tasks_[id];
    }
    const std::vector<TaskDescriptor>& tasks() const { return tasks_; }

    std::size_t register_task(TaskDescriptor d) {
        if (tasks_.size() >= cfg_.total_tasks)
            throw CapacityError("registry holds at most " + std::to_string(cfg_.total_tasks) + " tasks");
        if (d.class_count == 0 || d.class_count > n_out_)
            throw RangeError("class count " + std::to_string(d.class_count) + " outside [1," +
                             std::to_string(n_out_) + "]");
        if (!d.encoder || !d.encoder->frozen()) throw StateError("task '" + d.name + "' has no frozen encoder");
        if (d.normalizer.dim() != d.encoder->spec().feature_dim())
            throw StateError("task '" + d.name + "' normalizer is not fitted to its encoder output");
        if (d.encoder->spec().window != d.shape.window || d.encoder->spec().channels != d.shape.channels)
            throw DimensionError("task '" + d.name + "' shape key " + to_string(d.shape) +
                                 " disagrees with its encoder");
        auto it = by_shape_.find(d.shape);
        if (it != by_shape_.end() && !d.manual_id)
            throw AmbiguityError("shape " + to_string(d.shape) + " is already registered to task " +
                                 std::to_string(it->second.front()) + "; mark the task manual-id");
        d.task_id = tasks_.size();
        by_shape_[d.shape].push_back(d.task_id);
        tasks_.push_back(std::move(d));
        return tasks_.back().task_id;
    }

    std::size_t identify_task(ShapeKey shape) const {
        auto it = by_shape_.find(shape);
        if (it == by_shape_.end()) throw UnknownTaskError("no task registered for shape " + to_string(shape));
        if (it->second.size() > 1)
            throw AmbiguityError("shape " + to_string(shape) + " matches several tasks; pass an explicit task id");
        return it->second.front();
    }

    // Classifier inputs for a batch of windows (B,1,W,C) of one task.
    Tensor classifier_inputs(std::size_t task_id, const Tensor& windows) const {
        const TaskDescriptor& d = task(task_id);
        return features_to_inputs(task_id, d.encoder->encode(windows));
    }

    // Frozen-encoder features -> normalized (and possibly redistributed) rows.
    Tensor features_to_inputs(std::size_t task_id, const Tensor& features) const {
        const TaskDescriptor& d = task(task_id);
        Tensor x = normalize(d.normalizer, features, &normalizer_clamps_);
        if (redistribute_) x = redistribute(cfg_, task_id, x);
        return x;
    }

    std::size_t normalizer_clamp_events() const { return normalizer_clamps_; }

private:
    RedistributionConfig cfg_;
    bool redistribute_;
    std::size_t n_out_;
    std::vector<TaskDescriptor> tasks_;
    std::map<ShapeKey, std::vector<std::size_t>> by_shape_;
    mutable std::size_t normalizer_clamps_ = 0;
};

// Full pipeline for a batch of same-shaped windows: identify the task (unless
// given), encode, normalize, redistribute, classify, take the argmax over the
// task's own classes and compose the global label.
inline std::vector<GlobalLabel> predict_batch(const TaskRegistry& registry, Classifier& classifier,
                                              const Tensor& windows,
                                              std::optional<std::size_t> explicit_task = std::nullopt) {
    if (windows.rank() != 4) throw DimensionError("expected (B,1,W,C) windows, got " + shape_str(windows.shape()));
    const std::size_t task_id =
        explicit_task ? *explicit_task : registry.identify_task({windows.dim(2), windows.dim(3)});
    const TaskDescriptor& d = registry.task(task_id);
    const std::vector<int> local =
        predict_local(classifier, registry.classifier_inputs(task_id, windows), d.class_count);
    std::vector<GlobalLabel> out;
    out.reserve(local.size());
    for (int c : local) out.push_back(globalize(task_id, static_cast<std::size_t>(c), registry.output_dim()));
    return out;
}

// Single window, shaped (1,W,C) or (1,1,W,C).
inline GlobalLabel predict(const TaskRegistry& registry, Classifier& classifier, const Tensor& window,
                           std::optional<std::size_t> explicit_task = std::nullopt) {
    Tensor batch = window;
    if (window.rank() == 3) batch = window.reshaped({1, window.dim(0), window.dim(1), window.dim(2)});
    if (batch.rank() != 4 || batch.dim(0) != 1)
        throw DimensionError("predict expects a single window, got " + shape_str(window.shape()));
    return predict_batch(registry, classifier, batch, explicit_task).front();
}

}  // namespace ikan
