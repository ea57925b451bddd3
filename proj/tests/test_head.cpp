#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "swan/error.hpp"
#include "swan/head.hpp"
#include "test_util.hpp"

using namespace swan;
using ad::Tensor;
using ad::Var;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST(Decide, SingleSharedExpertPassesThrough) {
    nn::ParamStore store;
    nn::Rng rng(1);
    head::HeadShape shape{.input_width = 3, .experts = 1, .expert_out = 2, .gate_hidden = {}, .final_hidden = {}};
    head::HeadParams params(store, shape, rng);
    store.get("head.final.w0").value = Tensor::matrix(2, 1, {0.7, -1.2});
    std::mt19937_64 r(2);
    ad::Tape t;
    const Tensor vs = testutil::random_tensor({2, 2}, r);
    std::vector<Var> seg{t.constant(vs)};
    Var y = head::decide(t, t.constant(testutil::random_tensor({2, 3}, r)), seg, {}, Var{}, params);
    for (std::size_t row = 0; row < 2; ++row)
        EXPECT_NEAR(y.value()[row], sig(0.7 * vs.at(row, 0) - 1.2 * vs.at(row, 1)), 1e-15);
}

TEST(Decide, ZeroSelectorWeightsSilenceAeg) {
    nn::ParamStore store;
    nn::Rng rng(3);
    head::HeadShape shape{.input_width = 3, .experts = 4, .expert_out = 2};
    head::HeadParams params(store, shape, rng);
    std::mt19937_64 r(4);
    const Tensor ein = testutil::random_tensor({2, 3}, r);
    const Tensor s0 = testutil::random_tensor({2, 2}, r), s1 = testutil::random_tensor({2, 2}, r);
    ad::Tape t;
    std::vector<Var> seg{t.constant(s0), t.constant(s1)};
    std::vector<Var> aeg1{t.constant(testutil::random_tensor({2, 2}, r)), t.constant(testutil::random_tensor({2, 2}, r))};
    std::vector<Var> aeg2{t.constant(testutil::random_tensor({2, 2}, r)), t.constant(testutil::random_tensor({2, 2}, r))};
    Var zero_w = t.constant(Tensor({2, 2}, 0.0));
    Var y1 = head::decide(t, t.constant(ein), seg, aeg1, zero_w, params);
    Var y2 = head::decide(t, t.constant(ein), seg, aeg2, zero_w, params);
    EXPECT_EQ(y1.value().storage(), y2.value().storage());
}

TEST(Decide, HandSetTwoPlusTwo) {
    nn::ParamStore store;
    nn::Rng rng(5);
    head::HeadShape shape{.input_width = 1, .experts = 4, .expert_out = 1, .gate_hidden = {}, .final_hidden = {}};
    head::HeadParams params(store, shape, rng);
    store.get("head.gate.w0").value = Tensor::matrix(1, 4, {0.1, -0.4, 0.9, 0.3});
    store.get("head.gate.b0").value = Tensor::matrix(1, 4, {0.0, 0.2, -0.1, 0.05});
    store.get("head.final.w0").value = Tensor::matrix(1, 1, {1.3});
    store.get("head.final.b0").value = Tensor::matrix(1, 1, {-0.25});
    const double x = 0.6;
    const double vs[2] = {0.8, -0.5}, va[2] = {1.5, 0.4}, w[2] = {0.9, 0.2};
    double logits[4] = {0.1 * x, -0.4 * x + 0.2, 0.9 * x - 0.1, 0.3 * x + 0.05};
    double m = *std::max_element(logits, logits + 4), z = 0.0, g[4];
    for (int i = 0; i < 4; ++i) z += (g[i] = std::exp(logits[i] - m));
    for (double& v : g) v /= z;
    const double fin = g[0] * vs[0] + g[1] * vs[1] + g[2] * w[0] * va[0] + g[3] * w[1] * va[1];
    const double expected = sig(1.3 * fin - 0.25);

    ad::Tape t;
    std::vector<Var> seg{t.constant(Tensor::matrix(1, 1, {vs[0]})), t.constant(Tensor::matrix(1, 1, {vs[1]}))};
    std::vector<Var> aeg{t.constant(Tensor::matrix(1, 1, {va[0]})), t.constant(Tensor::matrix(1, 1, {va[1]}))};
    Var y = head::decide(t, t.constant(Tensor::matrix(1, 1, {x})), seg, aeg, t.constant(Tensor::matrix(1, 2, {w[0], w[1]})),
                         params);
    EXPECT_NEAR(y.value()[0], expected, 1e-12);
}

TEST(Decide, GradientsMatchFiniteDifferences) {
    nn::ParamStore store;
    nn::Rng rng(6);
    head::HeadShape shape{.input_width = 4, .experts = 5, .expert_out = 3, .gate_hidden = {3}, .final_hidden = {4}};
    head::HeadParams params(store, shape, rng);
    std::mt19937_64 r(7);
    std::vector<Tensor> inputs{testutil::random_tensor({3, 4}, r)};
    for (int i = 0; i < 5; ++i) inputs.push_back(testutil::random_tensor({3, 3}, r));
    inputs.push_back(testutil::random_tensor({3, 2}, r, 0, 1));
    auto loss = [&](ad::Tape& t, std::span<const Var> v) {
        std::vector<Var> seg{v[1], v[2], v[3]}, aeg{v[4], v[5]};
        return ad::sum(head::decide(t, v[0], seg, aeg, v[6], params));
    };
    EXPECT_LT(testutil::leaf_grad_error(loss, inputs), 1e-4);
    auto check = testutil::param_grad_error(store, [&](ad::Tape& t) {
        std::vector<Var> v;
        for (const auto& x : inputs) v.push_back(t.constant(x));
        return loss(t, v);
    });
    EXPECT_LT(check.worst, 1e-4);
}

TEST(Decide, RejectsMismatchedExperts) {
    nn::ParamStore store;
    nn::Rng rng(8);
    head::HeadShape shape{.input_width = 2, .experts = 2, .expert_out = 2};
    head::HeadParams params(store, shape, rng);
    ad::Tape t;
    std::vector<Var> seg{t.constant(Tensor({1, 2}))};
    EXPECT_THROW(head::decide(t, t.constant(Tensor({1, 2})), seg, {}, Var{}, params), DimensionError);
}

TEST(CeLoss, KnownValues) {
    ad::Tape t;
    auto ce = [&](std::vector<double> y, std::vector<double> p) {
        const std::size_t n = y.size();
        return head::ce_loss(t.constant(Tensor::matrix(n, 1, y)), t.constant(Tensor::matrix(n, 1, p))).value().item();
    };
    EXPECT_NEAR(ce({1}, {1.0}), 1e-12, 1e-15);
    EXPECT_NEAR(ce({1}, {0.5}), std::log(2.0), 1e-15);
    EXPECT_NEAR(ce({1, 0}, {0.9, 0.2}), (-std::log(0.9) - std::log(0.8)) / 2.0, 1e-15);
    EXPECT_NEAR(ce({1, 0}, {0.9, 0.2}), 0.164252, 1e-6);
    std::mt19937_64 r(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) EXPECT_GT(ce({double(r() % 2)}, {u(r)}), 0.0);
}

TEST(CosLoss, KnownValues) {
    ad::Tape t;
    auto cos = [&](std::vector<std::vector<double>> rows) {
        std::vector<Var> outs;
        for (auto& r : rows) outs.push_back(t.constant(Tensor::row(r)));
        return head::cos_loss(t, outs).value().item();
    };
    EXPECT_NEAR(cos({{1, 0}, {0, 1}}), 0.0, 1e-12);
    EXPECT_NEAR(cos({{0.3, 2}, {0.3, 2}}), 2.0, 1e-12);
    EXPECT_NEAR(cos({{1, 0}, {1, 1}}), 2.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(cos({{1, 0}, {1, 1}}), 1.414214, 1e-6);
    EXPECT_EQ(cos({{0, 0}, {1, 1}}), 0.0);
}

TEST(CosLoss, ScaleInvariantAndBounded) {
    std::mt19937_64 r(2);
    std::uniform_real_distribution<double> u(0.01, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        ad::Tape t;
        std::vector<Tensor> xs;
        for (int i = 0; i < 4; ++i) xs.push_back(testutil::random_tensor({3, 5}, r));
        std::vector<Var> a, b;
        for (auto& x : xs) {
            a.push_back(t.constant(x));
            Tensor s = x;
            const double c = u(r);
            for (double& v : s.storage()) v *= c;
            b.push_back(t.constant(s));
        }
        const double la = head::cos_loss(t, a).value().item();
        EXPECT_NEAR(la, head::cos_loss(t, b).value().item(), 1e-9);
        EXPECT_LE(la, 4.0 * 3.0);
    }
    ad::Tape t;
    std::vector<Var> parallel;
    for (double c : {1.0, 2.0, -3.0}) parallel.push_back(t.constant(Tensor::row({c, 2 * c})));
    EXPECT_NEAR(head::cos_loss(t, parallel).value().item(), 6.0, 1e-12);
}

TEST(VarLoss, KnownValues) {
    ad::Tape t;
    auto var = [&](std::vector<double> w, head::VarLossSign s = head::VarLossSign::Negated) {
        return head::var_loss(t.constant(Tensor::row(w)), s).value().item();
    };
    EXPECT_EQ(var({0.3, 0.3, 0.3, 0.3}), 0.0);
    EXPECT_EQ(var({0.0, 1.0}), -0.25);
    EXPECT_NEAR(var({0.1, 0.5, 0.9}), -0.32 / 3.0, 1e-15);
    EXPECT_NEAR(var({0.1, 0.5, 0.9}, head::VarLossSign::Literal), 0.32 / 3.0, 1e-15);
}

TEST(TotalLoss, KnownValues) {
    ad::Tape t;
    auto s = [&](double v) { return t.constant(Tensor::scalar(v)); };
    EXPECT_NEAR(head::total_loss(s(0.5), s(2.0), s(-0.2), {}).value().item(), 0.5018, 1e-12);
    EXPECT_EQ(head::total_loss(s(0.7), s(2.0), s(-0.2), {1.0, 0.0, 0.0}).value().item(), 0.7);
    EXPECT_EQ(head::total_loss(s(0), s(0), s(0), {}).value().item(), 0.0);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
    std::mt19937_64 r(3);
    std::vector<Tensor> in{testutil::random_tensor({4, 3}, r), testutil::random_tensor({4, 3}, r),
                           testutil::random_tensor({4, 3}, r), testutil::random_tensor({4, 5}, r, 0, 1),
                           testutil::random_tensor({4, 1}, r, 0.05, 0.95)};
    const Tensor labels = Tensor::matrix(4, 1, {1, 0, 0, 1});
    auto loss = [&](ad::Tape& t, std::span<const Var> v) {
        std::vector<Var> experts{v[0], v[1], v[2]};
        return head::total_loss(head::ce_loss(t.constant(labels), v[4]), head::cos_loss(t, experts),
                                head::var_loss(v[3]), {1.0, 0.3, 0.7});
    };
    EXPECT_LT(testutil::leaf_grad_error(loss, in), 1e-4);
}
