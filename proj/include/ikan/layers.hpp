#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ikan/tensor.hpp"

namespace ikan {

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double silu(double x) { return x * sigmoid(x); }

inline double silu_derivative(double x) {
    double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

inline Tensor silu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = silu(input[i]);
    return out;
}

// Fully connected layer: out = input · Wᵀ + b.
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in_dim, std::size_t out_dim)
        : weights({out_dim, in_dim}), bias(Shape{out_dim}) {}

    // Uniform ±1/√fan_in.
    void init(std::mt19937_64& rng) {
        double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
        fill_uniform(weights.value, -bound, bound, rng);
        fill_uniform(bias.value, -bound, bound, rng);
    }

    std::size_t in_dim() const { return weights.shape()[1]; }
    std::size_t out_dim() const { return weights.shape()[0]; }

    Tensor forward(const Tensor& input) {
        if (weights.value.rank() != 2 || bias.value.rank() != 1 || bias.shape()[0] != out_dim())
            throw DimensionError("linear parameters " + shape_str(weights.shape()) + " and bias " +
                                 shape_str(bias.shape()) + " are inconsistent");
        if (input.rank() != 2 || input.dim(1) != in_dim())
            throw DimensionError("linear layer expects (B," + std::to_string(in_dim()) + ") but got " +
                                 shape_str(input.shape()) + " against weights " + shape_str(weights.shape()));
        cache_ = input;
        const std::size_t batch = input.dim(0), in = in_dim(), out_n = out_dim();
        Tensor out({batch, out_n});
        const double* w = weights.value.data();
        const double* b = bias.value.data();
        for (std::size_t r = 0; r < batch; ++r) {
            const double* x = input.data() + r * in;
            double* y = out.data() + r * out_n;
            for (std::size_t o = 0; o < out_n; ++o) {
                const double* wr = w + o * in;
                double acc = b[o];
                for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x[i];
                y[o] = acc;
            }
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) {
        if (!cache_) throw StateError("linear backward called without a forward cache");
        const Tensor& input = *cache_;
        const std::size_t batch = input.dim(0), in = in_dim(), out_n = out_dim();
        if (grad_out.rank() != 2 || grad_out.dim(0) != batch || grad_out.dim(1) != out_n)
            throw DimensionError("linear backward got " + shape_str(grad_out.shape()));
        Tensor grad_in({batch, in});
        double* gw = weights.grad.data();
        double* gb = bias.grad.data();
        const double* w = weights.value.data();
        for (std::size_t r = 0; r < batch; ++r) {
            const double* x = input.data() + r * in;
            const double* g = grad_out.data() + r * out_n;
            double* gx = grad_in.data() + r * in;
            for (std::size_t o = 0; o < out_n; ++o) {
                const double go = g[o];
                if (go == 0.0) continue;
                gb[o] += go;
                double* gwr = gw + o * in;
                const double* wr = w + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    gwr[i] += go * x[i];
                    gx[i] += go * wr[i];
                }
            }
        }
        return grad_in;
    }

    ParamRefs parameters() { return {&weights, &bias}; }
    void clear_cache() { cache_.reset(); }

    Parameter weights;
    Parameter bias;

private:
    std::optional<Tensor> cache_;
};

class Relu {
public:
    Tensor forward(const Tensor& input) {
        Tensor out(input.shape());
        mask_.assign(input.size(), 0);
        for (std::size_t i = 0; i < input.size(); ++i) {
            if (input[i] > 0.0) {
                out[i] = input[i];
                mask_[i] = 1;
            }
        }
        has_cache_ = true;
        return out;
    }

    Tensor backward(const Tensor& grad_out) {
        if (!has_cache_) throw StateError("relu backward called without a forward cache");
        if (grad_out.size() != mask_.size()) throw DimensionError("relu backward got " + shape_str(grad_out.shape()));
        Tensor grad_in(grad_out.shape());
        for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[i] = mask_[i] ? grad_out[i] : 0.0;
        return grad_in;
    }

    void clear_cache() {
        mask_.clear();
        has_cache_ = false;
    }

private:
    std::vector<unsigned char> mask_;
    bool has_cache_ = false;
};

// Convolution along the time axis only, kernel (3,1), stride 1, no padding.
// Input (B, in_channels, W, C) -> output (B, out_channels, W-2, C); sensor
// channels are never mixed.
class ChannelConv {
public:
    static constexpr std::size_t kTaps = 3;

    ChannelConv() = default;
    ChannelConv(std::size_t in_channels, std::size_t out_channels)
        : kernels({out_channels, in_channels, kTaps}), bias(Shape{out_channels}) {}

    void init(std::mt19937_64& rng) {
        double bound = 1.0 / std::sqrt(static_cast<double>(in_channels() * kTaps));
        fill_uniform(kernels.value, -bound, bound, rng);
        fill_uniform(bias.value, -bound, bound, rng);
    }

    std::size_t in_channels() const { return kernels.shape()[1]; }
    std::size_t out_channels() const { return kernels.shape()[0]; }

    Tensor forward(const Tensor& input) {
        if (input.rank() != 4 || input.dim(1) != in_channels())
            throw DimensionError("channel-wise conv expects (B," + std::to_string(in_channels()) +
                                 ",W,C) but got " + shape_str(input.shape()));
        const std::size_t batch = input.dim(0), width = input.dim(2), chans = input.dim(3);
        if (width < kTaps)
            throw WindowTooShortError("time extent " + std::to_string(width) + " is shorter than the kernel (3)");
        const std::size_t out_w = width - (kTaps - 1);
        const std::size_t in_ch = in_channels(), out_ch = out_channels();
        const std::size_t in_plane = width * chans, out_plane = out_w * chans;
        Tensor out({batch, out_ch, out_w, chans});
        const double* k = kernels.value.data();
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t f = 0; f < out_ch; ++f) {
                double* y = out.data() + (b * out_ch + f) * out_plane;
                std::fill_n(y, out_plane, bias.value[f]);
                for (std::size_t g = 0; g < in_ch; ++g) {
                    const double* __restrict x = input.data() + (b * in_ch + g) * in_plane;
                    const double* kf = k + (f * in_ch + g) * kTaps;
                    const double k0 = kf[0], k1 = kf[1], k2 = kf[2];
                    double* __restrict yo = y;
                    for (std::size_t p = 0; p < out_plane; ++p)
                        yo[p] += k0 * x[p] + k1 * x[p + chans] + k2 * x[p + 2 * chans];
                }
            }
        }
        cache_ = input;
        return out;
    }

    Tensor backward(const Tensor& grad_out) {
        if (!cache_) throw StateError("conv backward called without a forward cache");
        const Tensor& input = *cache_;
        const std::size_t batch = input.dim(0), width = input.dim(2), chans = input.dim(3);
        const std::size_t out_w = width - (kTaps - 1);
        const std::size_t in_ch = in_channels(), out_ch = out_channels();
        const std::size_t in_plane = width * chans, out_plane = out_w * chans;
        if (grad_out.shape() != Shape{batch, out_ch, out_w, chans})
            throw DimensionError("conv backward got " + shape_str(grad_out.shape()));
        Tensor grad_in(input.shape());
        const double* k = kernels.value.data();
        double* gk = kernels.grad.data();
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t f = 0; f < out_ch; ++f) {
                const double* gy = grad_out.data() + (b * out_ch + f) * out_plane;
                double gsum = 0.0;
                for (std::size_t p = 0; p < out_plane; ++p) gsum += gy[p];
                bias.grad[f] += gsum;
                for (std::size_t g = 0; g < in_ch; ++g) {
                    const double* __restrict x = input.data() + (b * in_ch + g) * in_plane;
                    double* __restrict gx = grad_in.data() + (b * in_ch + g) * in_plane;
                    const std::size_t ki = (f * in_ch + g) * kTaps;
                    const double k0 = k[ki], k1 = k[ki + 1], k2 = k[ki + 2];
                    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                    for (std::size_t p = 0; p < out_plane; ++p) {
                        a0 += gy[p] * x[p];
                        a1 += gy[p] * x[p + chans];
                        a2 += gy[p] * x[p + 2 * chans];
                    }
                    for (std::size_t p = 0; p < out_plane; ++p) {
                        gx[p] += k0 * gy[p];
                        gx[p + chans] += k1 * gy[p];
                        gx[p + 2 * chans] += k2 * gy[p];
                    }
                    gk[ki] += a0;
                    gk[ki + 1] += a1;
                    gk[ki + 2] += a2;
                }
            }
        }
        return grad_in;
    }

    ParamRefs parameters() { return {&kernels, &bias}; }
    void clear_cache() { cache_.reset(); }

    Parameter kernels;
    Parameter bias;

private:
    std::optional<Tensor> cache_;
};

// Row-wise softmax of a (B,K) tensor.
inline Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw DimensionError("softmax expects (B,K) but got " + shape_str(logits.shape()));
    const std::size_t batch = logits.dim(0), k = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t r = 0; r < batch; ++r) {
        const double* z = logits.data() + r * k;
        double* p = out.data() + r * k;
        double mx = *std::max_element(z, z + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += (p[j] = std::exp(z[j] - mx));
        for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
    }
    return out;
}

struct LossAndGrad {
    double loss = 0.0;
    Tensor grad;
};

// Mean cross-entropy over the batch; grad = (softmax - onehot) / B.
inline LossAndGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size())
        throw DimensionError("cross-entropy got logits " + shape_str(logits.shape()) + " for " +
                             std::to_string(labels.size()) + " labels");
    const std::size_t batch = logits.dim(0), k = logits.dim(1);
    for (std::size_t r = 0; r < batch; ++r)
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k)
            throw LabelError("label " + std::to_string(labels[r]) + " at index " + std::to_string(r) +
                             " is outside [0," + std::to_string(k) + ")");
    LossAndGrad out{0.0, Tensor(logits.shape())};
    if (batch == 0) return out;
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t r = 0; r < batch; ++r) {
        const double* z = logits.data() + r * k;
        double* g = out.grad.data() + r * k;
        // log-sum-exp as max + log1p(rest) keeps tiny losses accurate.
        const std::size_t top = static_cast<std::size_t>(std::max_element(z, z + k) - z);
        const double mx = z[top];
        double rest = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            if (j != top) rest += std::exp(z[j] - mx);
        const double log1p_rest = std::log1p(rest);
        const double log_z = mx + log1p_rest;
        out.loss += (mx - z[labels[r]]) + log1p_rest;
        for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(z[j] - log_z) * inv_b;
        g[labels[r]] -= inv_b;
    }
    out.loss *= inv_b;
    if (!std::isfinite(out.loss)) throw NumericError("cross-entropy produced a non-finite loss");
    return out;
}

// Index of the largest of the first `valid` entries; ties go to the lowest index.
inline std::size_t masked_argmax(std::span<const double> row, std::size_t valid) {
    valid = std::min(valid, row.size());
    std::size_t best = 0;
    for (std::size_t j = 1; j < valid; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

}  // namespace ikan
