#pragma once

#include <string>
#include <vector>

#include "ikan/layers.hpp"
#include "ikan/tensor.hpp"

namespace ikan {

// A trainable map from fixed-width feature rows to logits.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual Tensor forward(const Tensor& features) = 0;
    virtual Tensor backward(const Tensor& grad_logits) = 0;
    virtual ParamRefs parameters() = 0;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t output_dim() const = 0;
    virtual std::string kind() const = 0;
};

// Argmax over the first `valid_classes` logits of every row.
inline std::vector<int> predict_local(Classifier& model, const Tensor& features, std::size_t valid_classes) {
    Tensor logits = model.forward(features);
    std::vector<int> out(logits.dim(0));
    for (std::size_t r = 0; r < out.size(); ++r)
        out[r] = static_cast<int>(masked_argmax(logits.row(r), valid_classes));
    return out;
}

}  // namespace ikan
