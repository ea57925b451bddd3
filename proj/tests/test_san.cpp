#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "swan/error.hpp"
#include "swan/san.hpp"
#include "test_util.hpp"

using namespace swan;
using ad::Tensor;
using ad::Var;

namespace {

struct Fixture {
    nn::ParamStore store;
    san::SanParams params;

    Fixture(std::size_t du, std::size_t d, std::vector<std::size_t> hidden = {32, 16}, std::uint64_t seed = 1) {
        nn::Rng rng(seed);
        params = san::SanParams(store, du, d, hidden, rng);
        std::mt19937_64 r(seed + 100);
        for (auto& p : store) p.value = testutil::random_tensor(p.value.shape(), r, -0.5, 0.5);
    }
};

}  // namespace

TEST(San, SingleSceneGetsFullWeight) {
    Fixture f(3, 4);
    std::mt19937_64 rng(2);
    ad::Tape t;
    Var eu = t.constant(testutil::random_tensor({1, 3}, rng));
    Var et = t.constant(testutil::random_tensor({1, 4}, rng));
    Var es = t.constant(testutil::random_tensor({1, 4}, rng));
    std::vector<Var> sim{es};
    auto out = san::san_forward(t, eu, et, sim, f.params);
    EXPECT_EQ(out.weights.value()[0], 1.0);
    EXPECT_EQ(out.vec_san.value().storage(), es.value().storage());
}

TEST(San, IdenticalScenesSplitEvenly) {
    Fixture f(3, 4);
    std::mt19937_64 rng(3);
    ad::Tape t;
    Var eu = t.constant(testutil::random_tensor({1, 3}, rng));
    Var et = t.constant(testutil::random_tensor({1, 4}, rng));
    Tensor s = testutil::random_tensor({1, 4}, rng);
    std::vector<Var> sim{t.constant(s), t.constant(s)};
    auto out = san::san_forward(t, eu, et, sim, f.params);
    EXPECT_EQ(out.weights.value()[0], 0.5);
    EXPECT_EQ(out.weights.value()[1], 0.5);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out.vec_san.value()[j], s[j], 1e-15);
}

TEST(San, HandComputedOneHiddenUnit) {
    // du = 1, d = 1, one hidden unit: score = v·relu(w·[u, t, t−s, t·s] + b) + c
    Fixture f(1, 1, {1});
    auto& w0 = f.store.get("san.score.w0").value;
    w0 = Tensor::matrix(4, 1, {0.5, -1.0, 2.0, 0.25});
    f.store.get("san.score.b0").value = Tensor::matrix(1, 1, {0.1});
    f.store.get("san.score.w1").value = Tensor::matrix(1, 1, {1.5});
    f.store.get("san.score.b1").value = Tensor::matrix(1, 1, {-0.2});
    const double u = 0.8, tv = 1.2, s1 = 0.3, s2 = -0.7;
    auto score = [&](double s) {
        const double h = std::max(0.0, 0.5 * u - 1.0 * tv + 2.0 * (tv - s) + 0.25 * tv * s + 0.1);
        return 1.5 * h - 0.2;
    };
    const double a1 = score(s1), a2 = score(s2);
    const double m = std::max(a1, a2);
    const double e1 = std::exp(a1 - m), e2 = std::exp(a2 - m);
    const double S1 = e1 / (e1 + e2), S2 = e2 / (e1 + e2);

    ad::Tape t;
    std::vector<Var> sim{t.constant(Tensor::matrix(1, 1, {s1})), t.constant(Tensor::matrix(1, 1, {s2}))};
    auto out = san::san_forward(t, t.constant(Tensor::matrix(1, 1, {u})), t.constant(Tensor::matrix(1, 1, {tv})), sim,
                                f.params);
    EXPECT_NEAR(out.weights.value()[0], S1, 1e-12);
    EXPECT_NEAR(out.weights.value()[1], S2, 1e-12);
    EXPECT_NEAR(out.vec_san.value()[0], S1 * s1 + S2 * s2, 1e-12);
}

TEST(San, EmptyListIsArgumentError) {
    Fixture f(2, 2);
    ad::Tape t;
    EXPECT_THROW(san::san_forward(t, t.constant(Tensor({1, 2})), t.constant(Tensor({1, 2})), {}, f.params),
                 ArgumentError);
}

TEST(San, PermutationEquivariantAndNormalized) {
    Fixture f(4, 3);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        ad::Tape t;
        Var eu = t.constant(testutil::random_tensor({1, 4}, rng));
        Var et = t.constant(testutil::random_tensor({1, 3}, rng));
        std::vector<Var> sim;
        for (int i = 0; i < 5; ++i) sim.push_back(t.constant(testutil::random_tensor({1, 3}, rng)));
        std::vector<std::size_t> perm{3, 0, 4, 1, 2};
        std::vector<Var> permuted;
        for (auto p : perm) permuted.push_back(sim[p]);
        auto a = san::san_forward(t, eu, et, sim, f.params);
        auto b = san::san_forward(t, eu, et, permuted, f.params);
        double total = 0;
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_NEAR(b.weights.value()[i], a.weights.value()[perm[i]], 1e-12);
            total += a.weights.value()[i];
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.vec_san.value()[j], b.vec_san.value()[j], 1e-12);
    }
}

TEST(San, BatchedMaskMatchesSingleAndZeroRow) {
    Fixture f(2, 3);
    std::mt19937_64 rng(6);
    const Tensor eu = testutil::random_tensor({2, 2}, rng);
    const Tensor et = testutil::random_tensor({2, 3}, rng);
    const Tensor es = testutil::random_tensor({6, 3}, rng);
    ad::Tape t;
    // row 0 uses slots 0 and 2, row 1 has no neighbour
    auto batched = san::san_forward_batch(t, t.constant(eu), t.constant(et), t.constant(es), 3,
                                          {1, 0, 1, 0, 0, 0}, f.params);
    std::vector<Var> sim{t.constant(Tensor::row({es.at(0, 0), es.at(0, 1), es.at(0, 2)})),
                         t.constant(Tensor::row({es.at(2, 0), es.at(2, 1), es.at(2, 2)}))};
    auto single = san::san_forward(t, t.constant(Tensor::row({eu[0], eu[1]})),
                                   t.constant(Tensor::row({et[0], et[1], et[2]})), sim, f.params);
    EXPECT_NEAR(batched.weights.value().at(0, 0), single.weights.value()[0], 1e-15);
    EXPECT_EQ(batched.weights.value().at(0, 1), 0.0);
    EXPECT_NEAR(batched.weights.value().at(0, 2), single.weights.value()[1], 1e-15);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(batched.vec_san.value().at(0, j), single.vec_san.value()[j], 1e-15);
        EXPECT_EQ(batched.vec_san.value().at(1, j), 0.0);
        EXPECT_EQ(batched.weights.value().at(1, j), 0.0);
    }
}

TEST(San, GradientsMatchFiniteDifferences) {
    Fixture f(3, 4, {5, 3});
    std::mt19937_64 rng(7);
    const Tensor eu = testutil::random_tensor({2, 3}, rng);
    const Tensor et = testutil::random_tensor({2, 4}, rng);
    const Tensor es = testutil::random_tensor({6, 4}, rng);
    auto loss = [&](ad::Tape& t, std::span<const Var> v) {
        auto out = san::san_forward_batch(t, v[0], v[1], v[2], 3, {1, 1, 1, 1, 0, 1}, f.params);
        return ad::add(ad::sum(ad::mul(out.vec_san, out.vec_san)), ad::sum(ad::mul(out.weights, out.weights)));
    };
    EXPECT_LT(testutil::leaf_grad_error(loss, {eu, et, es}), 1e-4);
    auto check = testutil::param_grad_error(f.store, [&](ad::Tape& t) {
        std::vector<Var> v{t.constant(eu), t.constant(et), t.constant(es)};
        return loss(t, v);
    });
    EXPECT_LT(check.worst, 1e-4);
}
