#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "swan/autodiff.hpp"
#include "swan/nn.hpp"

namespace swan::head {

struct HeadShape {
    std::size_t input_width = 0;  // |E_in|
    std::size_t experts = 0;      // N_s + N_a
    std::size_t expert_out = 16;
    std::vector<std::size_t> gate_hidden{};
    std::vector<std::size_t> final_hidden{16};
    bool gate_softmax = true;
};

struct HeadParams {
    nn::Mlp gate;       // MLP_g: E_in → N_s + N_a
    nn::Mlp final_mlp;  // d_expert → 1
    bool gate_softmax = true;

    HeadParams() = default;
    HeadParams(nn::ParamStore& store, const HeadShape& shape, nn::Rng& rng);
};

// G = softmax(MLP_g(E_in)) (raw MLP_g when gate_softmax is off);
// E_final_in = Σ_SEG G_i·Vec_s^i + Σ_AEG G_{N_s+i}·W_i·Vec_a^i;
// ŷ = sigmoid(MLP(E_final_in)). Gate columns are ordered SEG first, then AEG.
// `w` may be default-constructed when there are no AEG experts.
ad::Var decide(ad::Tape& tape, ad::Var e_in, std::span<const ad::Var> seg, std::span<const ad::Var> aeg, ad::Var w,
               const HeadParams& params);

inline constexpr double kProbabilityClamp = 1e-12;

// Mean binary cross-entropy; ŷ is clamped to [1e-12, 1 − 1e-12] first.
ad::Var ce_loss(ad::Var labels, ad::Var yhat);

// Σ over ordered pairs m ≠ n of |cos(E_a^m, E_a^n)|, averaged over the batch
// rows. A pair with a zero-norm side contributes 0.
ad::Var cos_loss(ad::Tape& tape, std::span<const ad::Var> aeg_outputs);

enum class VarLossSign { Negated, Literal };

// Negated (default): −Var_pop(W) per row, averaged over rows, so minimizing
// pushes gates apart. Literal keeps +Var_pop(W).
ad::Var var_loss(ad::Var w, VarLossSign sign = VarLossSign::Negated);

struct LossWeights {
    double alpha = 1.0;
    double beta = 1e-3;
    double gamma = 1e-3;
};

ad::Var total_loss(ad::Var ce, ad::Var cos, ad::Var var, const LossWeights& weights);

}  // namespace swan::head
