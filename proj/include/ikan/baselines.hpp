#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "ikan/classifier.hpp"
#include "ikan/layers.hpp"
#include "ikan/mlp.hpp"
#include "ikan/task_manager.hpp"

namespace ikan {

// ---------------------------------------------------------------------------
// Elastic weight consolidation

struct FisherAnchor {
    std::vector<Tensor> fisher;  // diagonal, one tensor per parameter
    std::vector<Tensor> anchor;  // parameter values when the task finished
    double lambda = 0.0;
};

// Diagonal empirical Fisher: mean over rows of the squared gradient of
// log p(y_hat | x), y_hat being the model's own prediction among the first
// `valid_classes` outputs. At most `max_samples` leading rows are used.
inline FisherAnchor ewc_fisher(Classifier& model, const Tensor& features, std::size_t valid_classes,
                               double lambda, std::size_t max_samples = 4096) {
    if (features.rank() != 2 || features.dim(0) == 0) throw EmptyDataError("Fisher estimate needs at least one sample");
    const ParamRefs params = model.parameters();
    FisherAnchor out;
    out.lambda = lambda;
    for (auto* p : params) {
        out.fisher.emplace_back(p->shape());
        out.anchor.push_back(p->value);
        p->zero_grad();
    }
    const std::size_t n = std::min(features.dim(0), max_samples);
    std::vector<std::size_t> one(1);
    for (std::size_t r = 0; r < n; ++r) {
        one[0] = r;
        Tensor logits = model.forward(features.gather_rows(one));
        const int y_hat = static_cast<int>(masked_argmax(logits.row(0), valid_classes));
        const int labels[1] = {y_hat};
        model.backward(softmax_cross_entropy(logits, labels).grad);
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Tensor& g = params[pi]->grad;
            Tensor& f = out.fisher[pi];
            for (std::size_t e = 0; e < g.size(); ++e) f[e] += g[e] * g[e];
            g.fill(0.0);
        }
    }
    for (auto& f : out.fisher)
        for (auto& v : f.values()) v /= static_cast<double>(n);
    return out;
}

namespace detail {
inline void check_anchor(const ParamRefs& params, const FisherAnchor& a) {
    if (a.fisher.size() != params.size() || a.anchor.size() != params.size())
        throw DimensionError("EWC anchor holds " + std::to_string(a.anchor.size()) + " tensors for " +
                             std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (a.fisher[i].shape() != params[i]->shape() || a.anchor[i].shape() != params[i]->shape())
            throw DimensionError("EWC anchor " + shape_str(a.anchor[i].shape()) + " does not match parameter " +
                                 shape_str(params[i]->shape()));
}
}  // namespace detail

// sum over anchors of (lambda/2) * sum_i F_i (theta_i - theta*_i)^2
inline double ewc_penalty(Classifier& model, std::span<const FisherAnchor> anchors) {
    const ParamRefs params = model.parameters();
    double total = 0.0;
    for (const auto& a : anchors) {
        detail::check_anchor(params, a);
        double s = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Tensor& v = params[i]->value;
            for (std::size_t e = 0; e < v.size(); ++e) {
                const double d = v[e] - a.anchor[i][e];
                s += a.fisher[i][e] * d * d;
            }
        }
        total += 0.5 * a.lambda * s;
    }
    return total;
}

// Adds the penalty gradient lambda * F * (theta - theta*) into param.grad.
inline void ewc_penalty_backward(Classifier& model, std::span<const FisherAnchor> anchors) {
    const ParamRefs params = model.parameters();
    for (const auto& a : anchors) {
        detail::check_anchor(params, a);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Parameter& p = *params[i];
            for (std::size_t e = 0; e < p.size(); ++e)
                p.grad[e] += a.lambda * a.fisher[i][e] * (p.value[e] - a.anchor[i][e]);
        }
    }
}

// ---------------------------------------------------------------------------
// Class-balanced experience replay

struct ReplaySample {
    std::vector<double> features;
    GlobalLabel label;
};

// One reservoir of capacity m per global class.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t per_class_capacity, std::uint64_t seed = 0)
        : capacity_(per_class_capacity), rng_(seed) {}

    std::size_t capacity() const { return capacity_; }

    void add(std::span<const double> features, GlobalLabel label) {
        Store& s = stores_[label.value];
        ++s.seen;
        ReplaySample sample{std::vector<double>(features.begin(), features.end()), label};
        if (s.items.size() < capacity_) {
            s.items.push_back(std::move(sample));
            return;
        }
        std::uniform_int_distribution<std::size_t> pick(0, s.seen - 1);
        const std::size_t slot = pick(rng_);
        if (slot < capacity_) s.items[slot] = std::move(sample);
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [_, s] : stores_) n += s.items.size();
        return n;
    }
    bool empty() const { return size() == 0; }
    std::size_t classes_seen() const { return stores_.size(); }

    const std::vector<ReplaySample>& class_store(GlobalLabel label) const {
        static const std::vector<ReplaySample> none;
        auto it = stores_.find(label.value);
        return it == stores_.end() ? none : it->second.items;
    }

    // `n` samples drawn uniformly (with replacement) from everything stored.
    std::vector<const ReplaySample*> draw(std::size_t n, std::mt19937_64& rng) const {
        std::vector<const ReplaySample*> all;
        for (const auto& [_, s] : stores_)
            for (const auto& item : s.items) all.push_back(&item);
        std::vector<const ReplaySample*> out;
        if (all.empty()) return out;
        std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
        for (std::size_t i = 0; i < n; ++i) out.push_back(all[pick(rng)]);
        return out;
    }

private:
    struct Store {
        std::vector<ReplaySample> items;
        std::size_t seen = 0;
    };
    std::size_t capacity_;
    std::mt19937_64 rng_;
    std::map<std::size_t, Store> stores_;
};

inline void replay_add(ReplayBuffer& buffer, std::span<const double> features, GlobalLabel label) {
    buffer.add(features, label);
}

struct ReplayStepResult {
    double loss = 0.0;
    std::vector<GlobalLabel> replayed;
};

// Forward/backward on the current batch stacked with an equal number of rows
// drawn from the buffer (nothing drawn while the buffer is empty). Gradients
// are accumulated into the model; the caller applies the optimizer.
inline ReplayStepResult replay_train_step(Classifier& model, const Tensor& features, std::span<const int> local_labels,
                                          const ReplayBuffer& buffer, std::mt19937_64& rng,
                                          std::size_t n_out = kClassifierOutputs) {
    ReplayStepResult result;
    Tensor inputs = features;
    std::vector<int> labels(local_labels.begin(), local_labels.end());
    const auto drawn = buffer.draw(features.dim(0), rng);
    if (!drawn.empty()) {
        const std::size_t d = features.dim(1);
        Tensor extra({drawn.size(), d});
        for (std::size_t r = 0; r < drawn.size(); ++r) {
            std::copy(drawn[r]->features.begin(), drawn[r]->features.end(), extra.data() + r * d);
            labels.push_back(static_cast<int>(localize(drawn[r]->label, n_out).second));
            result.replayed.push_back(drawn[r]->label);
        }
        inputs = concat_rows(inputs, extra);
    }
    Tensor logits = model.forward(inputs);
    auto lg = softmax_cross_entropy(logits, labels);
    model.backward(lg.grad);
    result.loss = lg.loss;
    return result;
}

}  // namespace ikan
