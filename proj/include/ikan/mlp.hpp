#pragma once

#include <random>
#include <string>

#include "ikan/classifier.hpp"
#include "ikan/layers.hpp"

namespace ikan {

// Two linear layers with a ReLU between them.
class MlpClassifier : public Classifier {
public:
    MlpClassifier(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, std::uint64_t seed = 0)
        : layer1_(in_dim, hidden), layer2_(hidden, out_dim) {
        std::mt19937_64 rng(seed);
        layer1_.init(rng);
        layer2_.init(rng);
    }

    Tensor forward(const Tensor& features) override {
        return layer2_.forward(relu_.forward(layer1_.forward(features)));
    }

    Tensor backward(const Tensor& grad_logits) override {
        return layer1_.backward(relu_.backward(layer2_.backward(grad_logits)));
    }

    ParamRefs parameters() override {
        return {&layer1_.weights, &layer1_.bias, &layer2_.weights, &layer2_.bias};
    }

    std::size_t input_dim() const override { return layer1_.in_dim(); }
    std::size_t hidden_dim() const { return layer1_.out_dim(); }
    std::size_t output_dim() const override { return layer2_.out_dim(); }
    std::string kind() const override { return "mlp"; }

    Linear& layer1() { return layer1_; }
    Linear& layer2() { return layer2_; }

private:
    Linear layer1_;
    Relu relu_;
    Linear layer2_;
};

}  // namespace ikan
