#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "swan/error.hpp"
#include "swan/nn.hpp"
#include "test_util.hpp"

using namespace swan;

TEST(ParamStore, AddGetAndDuplicates) {
    nn::ParamStore store;
    store.add("a", ad::Tensor({2, 3}, 1.0));
    store.add("b", ad::Tensor({4}, 0.0));
    EXPECT_EQ(store.size(), 2u);
    EXPECT_EQ(store.scalar_count(), 10u);
    EXPECT_TRUE(store.contains("a"));
    EXPECT_FALSE(store.contains("c"));
    EXPECT_EQ(store.get("a").value.shape(), (ad::Shape{2, 3}));
    EXPECT_ANY_THROW(store.add("a", ad::Tensor({1})));
    EXPECT_ANY_THROW(store.get("missing"));
}

TEST(Mlp, ShapesAndManualForward) {
    nn::ParamStore store;
    nn::Rng rng(5);
    nn::Mlp mlp(store, "m", 3, {4}, 2, rng);
    EXPECT_EQ(mlp.layer_count(), 2u);
    EXPECT_EQ(store.get("m.w0").value.shape(), (ad::Shape{3, 4}));
    EXPECT_EQ(store.get("m.b1").value.shape(), (ad::Shape{1, 2}));

    std::mt19937_64 r(9);
    for (auto& p : store) p.value = testutil::random_tensor(p.value.shape(), r, -1, 1);
    const ad::Tensor x = testutil::random_tensor({2, 3}, r);
    ad::Tape tape;
    ad::Var y = mlp.forward(tape, tape.constant(x));
    const auto& w0 = store.get("m.w0").value;
    const auto& b0 = store.get("m.b0").value;
    const auto& w1 = store.get("m.w1").value;
    const auto& b1 = store.get("m.b1").value;
    for (std::size_t row = 0; row < 2; ++row) {
        double h[4];
        for (std::size_t j = 0; j < 4; ++j) {
            double s = b0[j];
            for (std::size_t i = 0; i < 3; ++i) s += x.at(row, i) * w0.at(i, j);
            h[j] = std::max(0.0, s);
        }
        for (std::size_t o = 0; o < 2; ++o) {
            double s = b1[o];
            for (std::size_t j = 0; j < 4; ++j) s += h[j] * w1.at(j, o);
            EXPECT_NEAR(y.value().at(row, o), s, 1e-12);
        }
    }
    ad::Tape t2;
    EXPECT_THROW(mlp.forward(t2, t2.constant(ad::Tensor({2, 5}))), DimensionError);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
    nn::ParamStore store;
    nn::Rng rng(6);
    nn::Mlp mlp(store, "m", 4, {5, 3}, 2, rng);
    std::mt19937_64 r(10);
    for (auto& p : store) p.value = testutil::random_tensor(p.value.shape(), r, -1, 1);
    const ad::Tensor x = testutil::random_tensor({3, 4}, r);
    auto check = testutil::param_grad_error(store, [&](ad::Tape& t) {
        return ad::sum(ad::sigmoid(mlp.forward(t, t.constant(x))));
    });
    EXPECT_EQ(check.checked, store.scalar_count());
    EXPECT_LT(check.worst, 1e-4);
}

TEST(Adam, FirstStepMatchesClosedForm) {
    nn::ParamStore store;
    auto& p = store.add("w", ad::Tensor::row({1.0, -2.0, 0.5}));
    nn::AdamConfig cfg;
    cfg.lr = 0.1;
    nn::Adam adam(store, cfg);
    p.grad = ad::Tensor::row({0.5, -3.0, 0.0});
    adam.step();
    // m̂ = g and v̂ = g², so the first step moves each entry by lr·g/(|g| + ε).
    EXPECT_NEAR(p.value[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p.value[1], -2.0 + 0.1 * 3.0 / (3.0 + 1e-8), 1e-15);
    EXPECT_EQ(p.value[2], 0.5);
    EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, ZeroLearningRateLeavesValues) {
    nn::ParamStore store;
    auto& p = store.add("w", ad::Tensor::row({1.0, 2.0}));
    nn::AdamConfig cfg;
    cfg.lr = 0.0;
    nn::Adam adam(store, cfg);
    p.grad = ad::Tensor::row({3.0, -4.0});
    for (int i = 0; i < 5; ++i) adam.step();
    EXPECT_EQ(p.value.storage(), (std::vector<double>{1.0, 2.0}));
}

TEST(Adam, MinimizesQuadratic) {
    nn::ParamStore store;
    auto& p = store.add("w", ad::Tensor::row({3.0, -2.0}));
    nn::AdamConfig cfg;
    cfg.lr = 0.05;
    nn::Adam adam(store, cfg);
    for (int i = 0; i < 2000; ++i) {
        store.zero_grad();
        ad::Tape t;
        ad::Var w = t.param(p);
        t.backward(ad::sum(ad::mul(w, w)));
        adam.step();
    }
    EXPECT_NEAR(p.value[0], 0.0, 1e-2);
    EXPECT_NEAR(p.value[1], 0.0, 1e-2);
}
