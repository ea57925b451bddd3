#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "swan/autodiff.hpp"
#include "swan/datagen.hpp"
#include "swan/nn.hpp"

namespace swan::testutil {

inline double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

inline ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
    ad::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.data()) v = u(rng);
    return t;
}

using LeafLoss = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

// Largest relative error between tape gradients and central differences over
// every entry of every input.
inline double leaf_grad_error(const LeafLoss& f, std::vector<ad::Tensor> inputs, double h = 1e-5) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    ad::Var loss = f(tape, leaves);
    tape.backward(loss);

    auto eval = [&]() {
        ad::Tape t2;
        std::vector<ad::Var> l2;
        for (const auto& t : inputs) l2.push_back(t2.leaf(t));
        return f(t2, l2).value().item();
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const ad::Tensor& g = tape.grad(leaves[i]);
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            const double saved = inputs[i][j];
            inputs[i][j] = saved + h;
            const double up = eval();
            inputs[i][j] = saved - h;
            const double down = eval();
            inputs[i][j] = saved;
            worst = std::max(worst, rel_err(g[j], (up - down) / (2.0 * h)));
        }
    }
    return worst;
}

struct ParamGradCheck {
    double worst = 0.0;
    std::size_t checked = 0;
};

// Same comparison for every scalar of every parameter in `store`.
inline ParamGradCheck param_grad_error(nn::ParamStore& store, const std::function<ad::Var(ad::Tape&)>& f,
                                       double h = 1e-5) {
    store.zero_grad();
    {
        ad::Tape tape;
        ad::Var loss = f(tape);
        tape.backward(loss);
    }
    ParamGradCheck out;
    for (auto& p : store) {
        const ad::Tensor grad = p.grad.empty() ? ad::Tensor(p.value.shape(), 0.0) : p.grad;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double saved = p.value[j];
            p.value[j] = saved + h;
            double up, down;
            {
                ad::Tape t;
                up = f(t).value().item();
            }
            p.value[j] = saved - h;
            {
                ad::Tape t;
                down = f(t).value().item();
            }
            p.value[j] = saved;
            out.worst = std::max(out.worst, rel_err(grad[j], (up - down) / (2.0 * h)));
            ++out.checked;
        }
    }
    store.zero_grad();
    return out;
}

inline datagen::GenConfig tiny_gen(std::uint64_t seed = 1) {
    datagen::GenConfig c;
    c.archetypes = 2;
    c.train_scenes = 6;
    c.cold_start_scenes = 2;
    c.users = 60;
    c.items_per_scene = 12;
    c.examples_per_scene = 60;
    c.user_features = 2;
    c.item_features = 4;
    c.scene_attribute_features = 2;
    c.seed = seed;
    return c;
}

inline std::vector<const Example*> pointers(std::span<const Example> xs, std::size_t n) {
    std::vector<const Example*> out;
    for (std::size_t i = 0; i < std::min(n, xs.size()); ++i) out.push_back(&xs[i]);
    return out;
}

}  // namespace swan::testutil
