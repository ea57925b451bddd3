#pragma once

// Adaptive Ensemble-experts Module.
//
// The expert selector maps (E_u ⊕ Vec_san) to per-expert probabilities P and
// Vec_san to a shared threshold T, both through a sigmoid. Dics turns each
// (P_k, T) pair into a smooth gate W_k = logistic((P_k − T)/τ), which tends to
// a hard 0/1 comparison as τ → 0 while keeping gradients. AEG experts are
// scene-adaptive (weighted by W at the decision layer), SEG experts are shared.

#include <cstddef>
#include <vector>

#include "swan/autodiff.hpp"
#include "swan/nn.hpp"

namespace swan::aem {

struct AemShape {
    std::size_t input_width = 0;   // |E_in|
    std::size_t user_width = 0;    // |E_u|
    std::size_t scene_width = 0;   // |Vec_san|
    std::size_t adaptive = 10;     // N_a
    std::size_t shared = 10;       // N_s
    std::size_t expert_out = 16;   // d_expert
    std::vector<std::size_t> expert_hidden{32, 16};
    std::vector<std::size_t> selector_hidden{};
    std::vector<std::size_t> threshold_hidden{};
    double tau = 1e-3;
};

struct AemParams {
    std::vector<nn::Mlp> aeg;
    std::vector<nn::Mlp> seg;
    nn::Mlp selector;   // MLP_p: E_u ⊕ Vec_san → N_a
    nn::Mlp threshold;  // MLP_thre: Vec_san → 1
    double tau = 1e-3;

    AemParams() = default;
    AemParams(nn::ParamStore& store, const AemShape& shape, nn::Rng& rng);
};

struct SelectorOutput {
    ad::Var p;  // [B × N_a]
    ad::Var t;  // [B × 1]
    ad::Var w;  // [B × N_a]
};

// Throws ArgumentError when tau <= 0.
double dics(double p, double t, double tau);
// Row-wise Dics: p [B × N], t [B × 1] → [B × N].
ad::Var dics(ad::Var p, ad::Var t, double tau);

SelectorOutput expert_selector(ad::Tape& tape, ad::Var e_u, ad::Var vec_san, const AemParams& params);

std::vector<ad::Var> aeg_forward(ad::Tape& tape, ad::Var e_in, const AemParams& params);
std::vector<ad::Var> seg_forward(ad::Tape& tape, ad::Var e_in, const AemParams& params);

}  // namespace swan::aem
