#include <gtest/gtest.h>

#include <random>

#include "ikan/adam.hpp"
#include "ikan/grad_check.hpp"
#include "ikan/kan.hpp"

using namespace ikan;

namespace {

Tensor uniform_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Tensor t({rows, cols});
    std::mt19937_64 rng(seed);
    fill_uniform(t, lo, hi, rng);
    return t;
}

double weighted_sum(const Tensor& out, const Tensor& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
}

}  // namespace

TEST(KanLayer, ZeroCoefficientsGiveZeroOutput) {
    KanLayer layer(KanLayerConfig{3, 2, 0.0, 1.0, 5, 3, false});
    const Tensor y = layer.forward(uniform_inputs(4, 3, 1));
    for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(KanLayer, ConstantCoefficientsReproduceConstant) {
    KanLayer layer(KanLayerConfig{1, 1, 0.0, 1.0, 7, 3, false});
    layer.spline_coefs.value.fill(2.5);
    const Tensor y = layer.forward(uniform_inputs(50, 1, 2));
    for (double v : y.values()) EXPECT_NEAR(v, 2.5, 1e-12);
}

TEST(KanLayer, OutputIsLinearInCoefficients) {
    KanLayerConfig cfg{4, 3, 0.0, 1.0, 6, 3, false};
    KanLayer a(cfg), b(cfg), sum(cfg);
    std::mt19937_64 rng(3);
    a.init(rng);
    b.init(rng);
    for (std::size_t i = 0; i < sum.spline_coefs.size(); ++i)
        sum.spline_coefs.value[i] = 2.0 * a.spline_coefs.value[i] - b.spline_coefs.value[i];
    const Tensor x = uniform_inputs(5, 4, 4);
    const Tensor ya = a.forward(x), yb = b.forward(x), ys = sum.forward(x);
    for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(ys[i], 2.0 * ya[i] - yb[i], 1e-12);
}

TEST(KanLayer, ClampsOutOfRangeInputsAndCountsThem) {
    KanLayer layer(KanLayerConfig{2, 1, 0.0, 1.0, 5, 3, false});
    std::mt19937_64 rng(5);
    layer.init(rng);
    const Tensor y_out = layer.forward(Tensor::matrix({{1.4, -0.2}}));
    EXPECT_EQ(layer.clamp_events(), 2u);
    const Tensor y_edge = layer.forward(Tensor::matrix({{1.0, 0.0}}));
    EXPECT_EQ(layer.clamp_events(), 2u);
    EXPECT_EQ(y_out[0], y_edge[0]);
}

TEST(KanLayer, BackwardWithoutForwardIsStateError) {
    KanLayer layer(KanLayerConfig{2, 1, 0.0, 1.0, 5, 3, false});
    EXPECT_THROW(layer.backward(Tensor({1, 1})), StateError);
}

TEST(KanLayer, ZeroUpstreamGradientGivesZeroGrads) {
    KanLayer layer(KanLayerConfig{3, 2, 0.0, 1.0, 5, 3, true});
    std::mt19937_64 rng(6);
    layer.init(rng);
    layer.forward(uniform_inputs(4, 3, 7));
    const Tensor gx = layer.backward(Tensor({4, 2}));
    for (double v : gx.values()) EXPECT_EQ(v, 0.0);
    for (double v : layer.spline_coefs.grad.values()) EXPECT_EQ(v, 0.0);
    for (double v : layer.base_weights.grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(KanLayer, SingleSampleTouchesOnlyItsBases) {
    KanLayer layer(KanLayerConfig{2, 2, 0.0, 1.0, 10, 3, false});
    std::mt19937_64 rng(8);
    layer.init(rng);
    const Tensor x = Tensor::matrix({{0.43, 0.88}});
    layer.forward(x);
    layer.backward(Tensor::matrix({{1.0, -0.5}}));
    const std::size_t nb = layer.basis_count();
    for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t i = 0; i < 2; ++i) {
            const auto basis = bspline_basis(layer.knots(), x[i]);
            std::size_t nonzero = 0;
            for (std::size_t m = 0; m < nb; ++m) {
                const double g = layer.spline_coefs.grad[(o * 2 + i) * nb + m];
                if (basis[m] == 0.0) {
                    EXPECT_EQ(g, 0.0);
                }
                nonzero += g != 0.0;
            }
            EXPECT_EQ(nonzero, 4u);
        }
    }
}

TEST(KanLayer, ParametersExcludeBaseWhenDisabled) {
    KanLayer off(KanLayerConfig{2, 2, 0.0, 1.0, 5, 3, false});
    KanLayer on(KanLayerConfig{2, 2, 0.0, 1.0, 5, 3, true});
    EXPECT_EQ(off.parameters().size(), 1u);
    EXPECT_EQ(on.parameters().size(), 2u);
}

class KanGradCheck : public ::testing::TestWithParam<bool> {};

TEST_P(KanGradCheck, LayerMatchesCentralDifferences) {
    KanLayer layer(KanLayerConfig{4, 3, 0.0, 1.0, 8, 3, GetParam()});
    std::mt19937_64 rng(9);
    layer.init(rng);
    Tensor x = uniform_inputs(6, 4, 10, 0.02, 0.98);
    const Tensor w = uniform_inputs(6, 3, 11, -1.0, 1.0);
    ParamRefs params = layer.parameters();
    Tensor gx;
    auto targets = grad_targets(params);
    targets.push_back({&x, &gx});
    auto res = grad_check([&] { return weighted_sum(layer.forward(x), w); },
                          [&] {
                              zero_grads(params);
                              layer.forward(x);
                              gx = layer.backward(w);
                          },
                          targets);
    EXPECT_LT(res.max_relative_error, 1e-4);
}

TEST_P(KanGradCheck, StackedClassifierMatchesCentralDifferences) {
    KanClassifierConfig cfg;
    cfg.in_dim = 3;
    cfg.out_dim = 4;
    cfg.hidden = {5};
    cfg.grid_number = 6;
    cfg.use_base = GetParam();
    KanClassifier model(cfg, 12);
    Tensor x = uniform_inputs(5, 3, 13, 0.02, 0.98);
    const Tensor w = uniform_inputs(5, 4, 14, -1.0, 1.0);
    ParamRefs params = model.parameters();
    auto res = grad_check([&] { return weighted_sum(model.forward(x), w); },
                          [&] {
                              zero_grads(params);
                              model.forward(x);
                              model.backward(w);
                          },
                          grad_targets(params));
    EXPECT_LT(res.max_relative_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(UseBase, KanGradCheck, ::testing::Bool());

TEST(KanClassifier, DefaultShapeAndDeterministicInit) {
    KanClassifier a(KanClassifierConfig{}, 5), b(KanClassifierConfig{}, 5);
    EXPECT_EQ(a.input_dim(), 20u);
    EXPECT_EQ(a.output_dim(), 13u);
    EXPECT_EQ(a.layers().size(), 1u);
    EXPECT_EQ(a.layers()[0].spline_coefs.shape(), (Shape{13, 20, 33}));
    EXPECT_EQ(parameter_hash(a.parameters()), parameter_hash(b.parameters()));
    for (double v : a.layers()[0].spline_coefs.value.values()) {
        EXPECT_GE(v, -0.1);
        EXPECT_LE(v, 0.1);
    }
}
