#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ikan/bspline.hpp"
#include "ikan/classifier.hpp"
#include "ikan/layers.hpp"
#include "ikan/tensor.hpp"

namespace ikan {

struct KanLayerConfig {
    std::size_t in_dim = 20;
    std::size_t out_dim = 13;
    double range_min = 0.0;
    double range_max = 1.0;
    std::size_t grid_number = 30;
    std::size_t order = 3;
    bool use_base = false;
};

// One Kolmogorov-Arnold layer: every (output o, input i) edge carries a
// learnable spline on a fixed grid,
//
//   out[b,o] = sum_i ( sum_m coefs[o,i,m] * B_m(x[b,i]) + base[o,i] * silu(x[b,i]) ),
//
// with the silu term present only when use_base is set. Inputs outside the
// grid range are clamped, counted, and receive no input gradient. Grid
// update is never performed.
class KanLayer {
public:
    KanLayer() = default;
    explicit KanLayer(const KanLayerConfig& cfg)
        : spline_coefs({cfg.out_dim, cfg.in_dim, cfg.grid_number + cfg.order}),
          base_weights({cfg.out_dim, cfg.in_dim}),
          knots_(make_knots(cfg.range_min, cfg.range_max, cfg.grid_number, cfg.order)),
          use_base_(cfg.use_base) {
        if (cfg.in_dim == 0 || cfg.out_dim == 0) throw DimensionError("KAN layer dimensions must be positive");
    }

    // Coefficients i.i.d. uniform in [-0.1, 0.1]; base weights uniform ±1/√in.
    void init(std::mt19937_64& rng) {
        fill_uniform(spline_coefs.value, -0.1, 0.1, rng);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
        fill_uniform(base_weights.value, -bound, bound, rng);
        if (!use_base_) base_weights.value.fill(0.0);
    }

    std::size_t in_dim() const { return spline_coefs.shape()[1]; }
    std::size_t out_dim() const { return spline_coefs.shape()[0]; }
    std::size_t basis_count() const { return knots_.basis_count(); }
    const KnotVector& knots() const { return knots_; }
    bool use_base() const { return use_base_; }

    std::size_t clamp_events() const { return clamp_events_; }
    void reset_clamp_events() { clamp_events_ = 0; }

    Tensor forward(const Tensor& input) {
        const std::size_t in = in_dim(), out_n = out_dim(), nb = basis_count(), k1 = knots_.order + 1;
        if (input.rank() != 2 || input.dim(1) != in)
            throw DimensionError("KAN layer expects (B," + std::to_string(in) + ") but got " +
                                 shape_str(input.shape()));
        const std::size_t batch = input.dim(0);
        Cache c;
        c.batch = batch;
        c.first.resize(batch * in);
        c.values.resize(batch * in * k1);
        c.derivs.resize(batch * in * k1);
        c.clamped.assign(batch * in, 0);
        c.x.resize(batch * in);
        for (std::size_t e = 0; e < batch * in; ++e) {
            double x = input[e];
            if (!(x >= knots_.range_min && x <= knots_.range_max)) {
                c.clamped[e] = 1;
                ++clamp_events_;
                x = std::isnan(x) ? knots_.range_min : knots_.clamp(x);
            }
            c.x[e] = x;
            c.first[e] = eval_local_basis(knots_, x, &c.values[e * k1], &c.derivs[e * k1]);
        }

        Tensor out({batch, out_n});
        const double* coefs = spline_coefs.value.data();
        const double* base = base_weights.value.data();
        for (std::size_t b = 0; b < batch; ++b) {
            double* y = out.data() + b * out_n;
            for (std::size_t i = 0; i < in; ++i) {
                const std::size_t e = b * in + i;
                const double* v = &c.values[e * k1];
                const std::size_t first = c.first[e];
                const double s = use_base_ ? silu(c.x[e]) : 0.0;
                for (std::size_t o = 0; o < out_n; ++o) {
                    const double* cf = coefs + (o * in + i) * nb + first;
                    double acc = 0.0;
                    for (std::size_t r = 0; r < k1; ++r) acc += cf[r] * v[r];
                    if (use_base_) acc += base[o * in + i] * s;
                    y[o] += acc;
                }
            }
        }
        cache_ = std::move(c);
        return out;
    }

    Tensor backward(const Tensor& grad_out) {
        if (!cache_) throw StateError("KAN backward called without a forward cache");
        const Cache& c = *cache_;
        const std::size_t in = in_dim(), out_n = out_dim(), nb = basis_count(), k1 = knots_.order + 1;
        if (grad_out.rank() != 2 || grad_out.dim(0) != c.batch || grad_out.dim(1) != out_n)
            throw DimensionError("KAN backward got " + shape_str(grad_out.shape()));
        Tensor grad_in({c.batch, in});
        const double* coefs = spline_coefs.value.data();
        const double* base = base_weights.value.data();
        double* gcoefs = spline_coefs.grad.data();
        double* gbase = base_weights.grad.data();
        for (std::size_t b = 0; b < c.batch; ++b) {
            const double* g = grad_out.data() + b * out_n;
            for (std::size_t i = 0; i < in; ++i) {
                const std::size_t e = b * in + i;
                const double* v = &c.values[e * k1];
                const double* dv = &c.derivs[e * k1];
                const std::size_t first = c.first[e];
                const double s = use_base_ ? silu(c.x[e]) : 0.0;
                const double ds = use_base_ ? silu_derivative(c.x[e]) : 0.0;
                double gx = 0.0;
                for (std::size_t o = 0; o < out_n; ++o) {
                    const double go = g[o];
                    if (go == 0.0) continue;
                    const std::size_t edge = o * in + i;
                    double* gcf = gcoefs + edge * nb + first;
                    const double* cf = coefs + edge * nb + first;
                    double slope = 0.0;
                    for (std::size_t r = 0; r < k1; ++r) {
                        gcf[r] += go * v[r];
                        slope += cf[r] * dv[r];
                    }
                    if (use_base_) {
                        gbase[edge] += go * s;
                        slope += base[edge] * ds;
                    }
                    gx += go * slope;
                }
                grad_in[e] = c.clamped[e] ? 0.0 : gx;
            }
        }
        return grad_in;
    }

    ParamRefs parameters() {
        if (use_base_) return {&spline_coefs, &base_weights};
        return {&spline_coefs};
    }
    void clear_cache() { cache_.reset(); }

    Parameter spline_coefs;
    Parameter base_weights;

private:
    struct Cache {
        std::size_t batch = 0;
        std::vector<std::size_t> first;
        std::vector<double> values;
        std::vector<double> derivs;
        std::vector<double> x;
        std::vector<unsigned char> clamped;
    };

    KnotVector knots_;
    bool use_base_ = false;
    std::size_t clamp_events_ = 0;
    std::optional<Cache> cache_;
};

struct KanClassifierConfig {
    std::size_t in_dim = 20;
    std::size_t out_dim = 13;
    std::vector<std::size_t> hidden;  // empty: a single layer
    std::size_t grid_number = 30;
    std::size_t order = 3;
    bool use_base = false;
    double range_min = 0.0;
    double range_max = 1.0;
};

// Stack of KAN layers. Between stacked layers a logistic squash maps the
// hidden activations back into the grid range.
class KanClassifier : public Classifier {
public:
    explicit KanClassifier(const KanClassifierConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
        std::vector<std::size_t> dims{cfg.in_dim};
        dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
        dims.push_back(cfg.out_dim);
        std::mt19937_64 rng(seed);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            KanLayerConfig lc{dims[l], dims[l + 1], cfg.range_min, cfg.range_max, cfg.grid_number, cfg.order,
                              cfg.use_base};
            layers_.emplace_back(lc);
            layers_.back().init(rng);
        }
        squash_cache_.resize(layers_.size());
    }

    Tensor forward(const Tensor& features) override {
        Tensor h = layers_[0].forward(features);
        for (std::size_t l = 1; l < layers_.size(); ++l) {
            Tensor s(h.shape());
            const double span = cfg_.range_max - cfg_.range_min;
            for (std::size_t i = 0; i < h.size(); ++i) s[i] = cfg_.range_min + span * sigmoid(h[i]);
            squash_cache_[l] = h;
            h = layers_[l].forward(s);
        }
        return h;
    }

    Tensor backward(const Tensor& grad_logits) override {
        Tensor g = grad_logits;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            g = layers_[l].backward(g);
            if (l > 0) {
                const Tensor& pre = squash_cache_[l];
                const double span = cfg_.range_max - cfg_.range_min;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double sg = sigmoid(pre[i]);
                    g[i] *= span * sg * (1.0 - sg);
                }
            }
        }
        return g;
    }

    ParamRefs parameters() override {
        ParamRefs out;
        for (auto& l : layers_)
            for (auto* p : l.parameters()) out.push_back(p);
        return out;
    }

    std::size_t input_dim() const override { return cfg_.in_dim; }
    std::size_t output_dim() const override { return cfg_.out_dim; }
    std::string kind() const override { return "kan"; }

    std::size_t clamp_events() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.clamp_events();
        return n;
    }
    // Clamps on the first layer only, i.e. on the classifier's own inputs.
    std::size_t input_clamp_events() const { return layers_.front().clamp_events(); }

    std::vector<KanLayer>& layers() { return layers_; }
    const std::vector<KanLayer>& layers() const { return layers_; }
    const KanClassifierConfig& config() const { return cfg_; }

private:
    KanClassifierConfig cfg_;
    std::vector<KanLayer> layers_;
    std::vector<Tensor> squash_cache_;
};

}  // namespace ikan
