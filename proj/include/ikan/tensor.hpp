#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ikan/errors.hpp"

namespace ikan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_size(shape_) != data_.size())
            throw DimensionError("tensor shape " + shape_str(shape_) + " does not match " +
                                 std::to_string(data_.size()) + " values");
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        std::vector<double> data;
        std::size_t cols = rows.size() ? rows.begin()->size() : 0;
        for (const auto& row : rows) {
            if (row.size() != cols) throw DimensionError("ragged matrix literal");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor({rows.size(), cols}, std::move(data));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    std::span<double> row(std::size_t i) {
        std::size_t stride = data_.size() / shape_[0];
        return {data_.data() + i * stride, stride};
    }
    std::span<const double> row(std::size_t i) const {
        std::size_t stride = data_.size() / shape_[0];
        return {data_.data() + i * stride, stride};
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }

    // Rows `indices` of the leading axis, in the given order.
    Tensor gather_rows(std::span<const std::size_t> indices) const {
        std::size_t stride = shape_.empty() || shape_[0] == 0 ? 0 : data_.size() / shape_[0];
        Shape out_shape = shape_;
        out_shape[0] = indices.size();
        Tensor out(out_shape);
        for (std::size_t r = 0; r < indices.size(); ++r)
            std::copy_n(data_.data() + indices[r] * stride, stride, out.data() + r * stride);
        return out;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// Concatenate along the leading axis; trailing extents must agree.
inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    Shape tail_a(a.shape().begin() + 1, a.shape().end());
    Shape tail_b(b.shape().begin() + 1, b.shape().end());
    if (tail_a != tail_b)
        throw DimensionError("cannot stack " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
    Shape shape = a.shape();
    shape[0] += b.dim(0);
    std::vector<double> data(a.storage());
    data.insert(data.end(), b.storage().begin(), b.storage().end());
    return Tensor(shape, std::move(data));
}

// A learnable tensor together with its gradient and Adam moments.
struct Parameter {
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    std::size_t step_count = 0;

    Parameter() = default;
    explicit Parameter(Shape shape)
        : value(shape), grad(shape), adam_m(shape), adam_v(shape) {}
    explicit Parameter(Tensor init)
        : value(std::move(init)), grad(value.shape()), adam_m(value.shape()), adam_v(value.shape()) {}

    const Shape& shape() const noexcept { return value.shape(); }
    std::size_t size() const noexcept { return value.size(); }

    void zero_grad() { grad.fill(0.0); }
    void reset_optimizer_state() {
        adam_m.fill(0.0);
        adam_v.fill(0.0);
        step_count = 0;
    }
    // Replace the value, keeping shapes of the auxiliary tensors in sync.
    void assign(Tensor v) {
        if (v.shape() != value.shape())
            throw DimensionError("parameter " + shape_str(value.shape()) + " cannot take " + shape_str(v.shape()));
        value = std::move(v);
    }
};

using ParamRefs = std::vector<Parameter*>;

inline void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.values()) v = dist(rng);
}

inline std::vector<Tensor> snapshot(const ParamRefs& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

inline void restore(const ParamRefs& params, const std::vector<Tensor>& values) {
    if (params.size() != values.size()) throw DimensionError("snapshot does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->assign(values[i]);
}

// FNV-1a over the raw bytes of every parameter value.
inline std::uint64_t parameter_hash(const ParamRefs& params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto* p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
        for (std::size_t i = 0; i < p->value.size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

}  // namespace ikan
