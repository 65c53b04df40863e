#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ikan/layers.hpp"
#include "ikan/tensor.hpp"

namespace ikan {

inline constexpr std::size_t kConvLayers = 4;

struct EncoderSpec {
    std::size_t window = 0;
    std::size_t channels = 0;
    std::size_t conv_channels = 10;
    std::size_t fusion_dim = 8;

    std::size_t conv_output_width() const { return window - 2 * kConvLayers; }
    std::size_t feature_dim() const { return 2 * conv_channels; }

    void validate() const {
        if (window < 2 * kConvLayers + 1)
            throw WindowTooShortError("window " + std::to_string(window) +
                                      " leaves no time steps after four (3,1) convolutions (need >= 9)");
        if (channels == 0 || conv_channels == 0 || fusion_dim == 0)
            throw DimensionError("encoder channels, conv channels and fusion dim must be positive");
    }
};

// Attention pooling and max pooling over the T x D positions of each feature
// map, concatenated: (B,F,T,D) -> (B,2F). The attention scores are one
// learnable vector over positions, shared by all feature maps.
class WeightedAggregate {
public:
    WeightedAggregate() = default;
    explicit WeightedAggregate(std::size_t positions) : scores(Shape{positions}) {}

    std::size_t positions() const { return scores.size(); }

    Tensor forward(const Tensor& input) {
        if (input.rank() != 4 || input.dim(2) * input.dim(3) != positions())
            throw DimensionError("aggregation expects (B,F,T,D) with T*D=" + std::to_string(positions()) +
                                 " but got " + shape_str(input.shape()));
        const std::size_t batch = input.dim(0), maps = input.dim(1), np = positions();
        Cache c;
        c.input = input;
        c.alpha = softmax(scores.value.reshaped({1, np}));
        c.argmax.resize(batch * maps);
        Tensor out({batch, 2 * maps});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t f = 0; f < maps; ++f) {
                const double* x = input.data() + (b * maps + f) * np;
                double att = 0.0;
                std::size_t best = 0;
                for (std::size_t p = 0; p < np; ++p) {
                    att += c.alpha[p] * x[p];
                    if (x[p] > x[best]) best = p;
                }
                out.at(b, f) = att;
                out.at(b, maps + f) = x[best];
                c.argmax[b * maps + f] = best;
            }
        }
        cache_ = std::move(c);
        return out;
    }

    Tensor backward(const Tensor& grad_out) {
        if (!cache_) throw StateError("aggregation backward called without a forward cache");
        const Cache& c = *cache_;
        const std::size_t batch = c.input.dim(0), maps = c.input.dim(1), np = positions();
        if (grad_out.shape() != Shape{batch, 2 * maps})
            throw DimensionError("aggregation backward got " + shape_str(grad_out.shape()));
        Tensor grad_in(c.input.shape());
        std::vector<double> g_alpha(np, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t f = 0; f < maps; ++f) {
                const double ga = grad_out.at(b, f);
                const double gm = grad_out.at(b, maps + f);
                const double* x = c.input.data() + (b * maps + f) * np;
                double* gx = grad_in.data() + (b * maps + f) * np;
                for (std::size_t p = 0; p < np; ++p) {
                    gx[p] = ga * c.alpha[p];
                    g_alpha[p] += ga * x[p];
                }
                gx[c.argmax[b * maps + f]] += gm;
            }
        }
        double dot = 0.0;
        for (std::size_t p = 0; p < np; ++p) dot += g_alpha[p] * c.alpha[p];
        for (std::size_t p = 0; p < np; ++p) scores.grad[p] += c.alpha[p] * (g_alpha[p] - dot);
        return grad_in;
    }

    ParamRefs parameters() { return {&scores}; }
    void clear_cache() { cache_.reset(); }

    Parameter scores;

private:
    struct Cache {
        Tensor input;
        Tensor alpha;
        std::vector<std::size_t> argmax;
    };
    std::optional<Cache> cache_;
};

inline Tensor weighted_aggregate(WeightedAggregate& layer, const Tensor& features) {
    return layer.forward(features);
}

// Task-specific feature extractor: four channel-wise (3,1) convolutions with
// ReLU, a linear fusion across the sensor axis, then weighted aggregation.
// (B,1,W,C) -> (B,2F) for any admissible (W,C).
class Encoder {
public:
    Encoder() = default;
    explicit Encoder(const EncoderSpec& spec) : spec_(spec) {
        spec.validate();
        for (std::size_t l = 0; l < kConvLayers; ++l)
            convs_[l] = ChannelConv(l == 0 ? 1 : spec.conv_channels, spec.conv_channels);
        fusion_ = Linear(spec.channels, spec.fusion_dim);
        aggregate_ = WeightedAggregate(spec.conv_output_width() * spec.fusion_dim);
    }

    const EncoderSpec& spec() const { return spec_; }
    bool frozen() const { return frozen_; }
    void freeze() {
        frozen_ = true;
        clear_cache();
    }

    Tensor forward(const Tensor& batch) {
        if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != spec_.window || batch.dim(3) != spec_.channels)
            throw DimensionError("encoder expects (B,1," + std::to_string(spec_.window) + "," +
                                 std::to_string(spec_.channels) + ") but got " + shape_str(batch.shape()));
        Tensor h = batch;
        for (std::size_t l = 0; l < kConvLayers; ++l) h = relus_[l].forward(convs_[l].forward(h));
        const std::size_t b = h.dim(0), f = h.dim(1), t = h.dim(2), c = h.dim(3);
        Tensor fused = fusion_.forward(h.reshaped({b * f * t, c}));
        return aggregate_.forward(fused.reshaped({b, f, t, spec_.fusion_dim}));
    }

    Tensor backward(const Tensor& grad_features) {
        if (frozen_) throw StateError("encoder is frozen");
        Tensor g = aggregate_.backward(grad_features);
        const std::size_t b = g.dim(0), f = g.dim(1), t = g.dim(2);
        g = fusion_.backward(g.reshaped({b * f * t, spec_.fusion_dim}));
        g = g.reshaped({b, f, t, spec_.channels});
        for (std::size_t l = kConvLayers; l-- > 0;) g = convs_[l].backward(relus_[l].backward(g));
        return g;
    }

    // Features for many windows without keeping caches; chunked to bound memory.
    Tensor encode(const Tensor& windows, std::size_t chunk = 128) {
        const std::size_t n = windows.dim(0);
        Tensor out({n, spec_.feature_dim()});
        std::vector<std::size_t> idx;
        for (std::size_t start = 0; start < n; start += chunk) {
            const std::size_t end = std::min(n, start + chunk);
            idx.resize(end - start);
            for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
            Tensor part = forward(windows.gather_rows(idx));
            std::copy(part.storage().begin(), part.storage().end(), out.data() + start * spec_.feature_dim());
        }
        clear_cache();
        return out;
    }

    ParamRefs parameters() {
        ParamRefs out;
        for (auto& c : convs_)
            for (auto* p : c.parameters()) out.push_back(p);
        for (auto* p : fusion_.parameters()) out.push_back(p);
        for (auto* p : aggregate_.parameters()) out.push_back(p);
        return out;
    }

    ParamRefs trainable_parameters() {
        if (frozen_) throw StateError("encoder is frozen");
        return parameters();
    }

    void clear_cache() {
        for (auto& c : convs_) c.clear_cache();
        for (auto& r : relus_) r.clear_cache();
        fusion_.clear_cache();
        aggregate_.clear_cache();
    }

    std::array<ChannelConv, kConvLayers>& convs() { return convs_; }
    Linear& fusion() { return fusion_; }
    WeightedAggregate& aggregate() { return aggregate_; }

private:
    friend Encoder build_encoder(const EncoderSpec&, std::uint64_t);

    EncoderSpec spec_;
    std::array<ChannelConv, kConvLayers> convs_;
    std::array<Relu, kConvLayers> relus_;
    Linear fusion_;
    WeightedAggregate aggregate_;
    bool frozen_ = false;
};

// Seeded construction; weights uniform ±1/√fan_in, attention scores zero.
inline Encoder build_encoder(const EncoderSpec& spec, std::uint64_t seed) {
    Encoder enc(spec);
    std::mt19937_64 rng(seed);
    for (auto& c : enc.convs_) c.init(rng);
    enc.fusion_.init(rng);
    return enc;
}

}  // namespace ikan
