#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "ikan/kan.hpp"
#include "ikan/task_manager.hpp"

using namespace ikan;

namespace {

TaskDescriptor descriptor(const std::string& name, std::size_t w, std::size_t c, std::size_t classes,
                          bool manual = false) {
    TaskDescriptor d;
    d.name = name;
    d.shape = {w, c};
    d.class_count = classes;
    d.manual_id = manual;
    d.encoder = std::make_shared<Encoder>(build_encoder({w, c, 10, 8}, w * 31 + c));
    d.encoder->freeze();
    d.normalizer.min.assign(20, -1.0);
    d.normalizer.max.assign(20, 1.0);
    return d;
}

Tensor windows(std::size_t b, std::size_t w, std::size_t c, std::uint64_t seed) {
    Tensor t({b, 1, w, c});
    std::mt19937_64 rng(seed);
    fill_uniform(t, -1.0, 1.0, rng);
    return t;
}

}  // namespace

TEST(GlobalLabels, HandValues) {
    EXPECT_EQ(globalize(0, 5).value, 5u);
    EXPECT_EQ(globalize(2, 7).value, 33u);
    EXPECT_EQ(globalize(5, 12).value, 77u);
    EXPECT_EQ(localize({33}), std::make_pair(std::size_t{2}, std::size_t{7}));
    EXPECT_EQ(localize({0}), std::make_pair(std::size_t{0}, std::size_t{0}));
    EXPECT_THROW(globalize(1, 13), RangeError);
}

TEST(GlobalLabels, RoundTripAllPairs) {
    std::size_t n = 0;
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t c = 0; c < 13; ++c) {
            EXPECT_EQ(localize(globalize(t, c)), std::make_pair(t, c));
            ++n;
        }
    EXPECT_EQ(n, 78u);
}

TEST(Registry, AssignsSequentialIdsAndIdentifies) {
    TaskRegistry reg(RedistributionConfig{6, 4.0});
    EXPECT_EQ(reg.register_task(descriptor("opportunity", 90, 113, 13)), 0u);
    EXPECT_EQ(reg.register_task(descriptor("pamap2", 200, 39, 12)), 1u);
    EXPECT_EQ(reg.register_task(descriptor("dsads", 125, 45, 13)), 2u);
    EXPECT_EQ(reg.register_task(descriptor("wisdm", 80, 3, 6)), 3u);
    EXPECT_EQ(reg.identify_task({80, 3}), 3u);
    EXPECT_EQ(reg.identify_task({90, 113}), 0u);
    EXPECT_THROW(reg.identify_task({999, 1}), UnknownTaskError);
}

TEST(Registry, DuplicateShapeNeedsManualId) {
    TaskRegistry reg(RedistributionConfig{6, 4.0});
    reg.register_task(descriptor("a", 200, 200, 5));
    EXPECT_THROW(reg.register_task(descriptor("b", 200, 200, 5)), AmbiguityError);
    EXPECT_EQ(reg.register_task(descriptor("b", 200, 200, 5, true)), 1u);
    EXPECT_THROW(reg.identify_task({200, 200}), AmbiguityError);
}

TEST(Registry, CapacityAndPreconditions) {
    TaskRegistry reg(RedistributionConfig{6, 4.0});
    for (std::size_t i = 0; i < 6; ++i) reg.register_task(descriptor("t", 20 + i, 2, 4));
    EXPECT_THROW(reg.register_task(descriptor("t", 40, 2, 4)), CapacityError);

    TaskRegistry r2(RedistributionConfig{6, 4.0});
    EXPECT_THROW(r2.register_task(descriptor("big", 20, 2, 14)), RangeError);
    auto unfrozen = descriptor("u", 20, 2, 3);
    unfrozen.encoder = std::make_shared<Encoder>(build_encoder({20, 2, 10, 8}, 1));
    EXPECT_THROW(r2.register_task(unfrozen), StateError);
    auto mismatched = descriptor("m", 20, 2, 3);
    mismatched.shape = {21, 2};
    EXPECT_THROW(r2.register_task(mismatched), DimensionError);
}

TEST(Registry, InputsLandInTaskIntervalWithoutClamps) {
    TaskRegistry reg(RedistributionConfig{6, 4.0});
    auto d = descriptor("a", 30, 3, 4);
    const Tensor train = windows(16, 30, 3, 2);
    d.normalizer = fit_normalizer(d.encoder->encode(train));
    const std::size_t id = reg.register_task(descriptor("z", 25, 2, 3));
    ASSERT_EQ(id, 0u);
    const std::size_t id1 = reg.register_task(std::move(d));
    const Tensor x = reg.classifier_inputs(id1, train);
    auto [lo, hi] = task_interval(reg.redistribution(), id1);
    for (double v : x.values()) {
        EXPECT_GE(v, lo);
        EXPECT_LE(v, hi);
    }
    EXPECT_EQ(reg.normalizer_clamp_events(), 0u);
}

TEST(Predict, ComposesGlobalLabelAndIsDeterministic) {
    TaskRegistry reg(RedistributionConfig{6, 4.0});
    reg.register_task(descriptor("a", 30, 3, 4));
    reg.register_task(descriptor("b", 40, 2, 6));
    KanClassifier model(KanClassifierConfig{}, 3);
    const Tensor x = windows(5, 40, 2, 4);
    const auto first = predict_batch(reg, model, x);
    const auto second = predict_batch(reg, model, x);
    EXPECT_EQ(first, second);
    for (auto g : first) {
        EXPECT_EQ(localize(g).first, 1u);
        EXPECT_LT(localize(g).second, 6u);
    }
    const Tensor one = windows(1, 30, 3, 5).reshaped({1, 30, 3});
    EXPECT_EQ(localize(predict(reg, model, one)).first, 0u);
    EXPECT_THROW(predict_batch(reg, model, windows(1, 33, 3, 6)), UnknownTaskError);
}

// With all logits equal the lowest class index wins.
TEST(Predict, TieGoesToLowestIndex) {
    TaskRegistry reg(RedistributionConfig{6, 4.0});
    reg.register_task(descriptor("a", 30, 3, 4));
    reg.register_task(descriptor("b", 40, 2, 6));
    KanClassifier model(KanClassifierConfig{}, 3);
    model.layers()[0].spline_coefs.value.fill(0.0);
    for (auto g : predict_batch(reg, model, windows(3, 40, 2, 7))) EXPECT_EQ(g.value, 13u);
}
