#pragma once

// Similarity Attention Network: a DIN-style scorer over
// [E_u ⊕ E_t ⊕ (E_t − E_s) ⊕ (E_t ⊗ E_s)] for each similar scene, softmax
// across the retrieved similar scenes, and the attention-weighted sum of their
// embeddings.

#include <cstddef>
#include <span>
#include <vector>

#include "swan/autodiff.hpp"
#include "swan/nn.hpp"

namespace swan::san {

struct SanParams {
    nn::Mlp score;
    std::size_t user_width = 0;
    std::size_t scene_width = 0;

    SanParams() = default;
    SanParams(nn::ParamStore& store, std::size_t user_width, std::size_t scene_width,
              const std::vector<std::size_t>& hidden, nn::Rng& rng);
};

struct SanOutput {
    ad::Var weights;  // S: [B × K], zero on padded slots
    ad::Var vec_san;  // [B × d_scene]
};

// Single example: e_u [1 × du], e_t [1 × d], one [1 × d] embedding per similar
// scene. Throws ArgumentError on an empty list.
SanOutput san_forward(ad::Tape& tape, ad::Var e_u, ad::Var e_t, std::span<const ad::Var> similar,
                      const SanParams& params);

// Batched: e_s holds K slots per example ([B·K × d], example-major) and
// mask[b·K + j] marks real slots. An example with no real slot gets S = 0 and
// Vec_san = 0.
SanOutput san_forward_batch(ad::Tape& tape, ad::Var e_u, ad::Var e_t, ad::Var e_s, std::size_t slots,
                            std::vector<double> mask, const SanParams& params);

}  // namespace swan::san
