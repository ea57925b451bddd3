#pragma once

// Cross-scene feature representation: every known scene owns an embedding
// table set over the scene-attribute features. The target scene's attributes
// are embedded with each similar scene's tables and mixed by the attention
// weights S.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swan/autodiff.hpp"
#include "swan/nn.hpp"

namespace swan::cfr {

// One stacked parameter per scene attribute: scene s, attribute index v sits
// at row s·(cardinality+1) + v.
class CfrTables {
public:
    CfrTables() = default;
    CfrTables(nn::ParamStore& store, std::size_t scenes, std::span<const std::size_t> attribute_rows,
              std::size_t dim, nn::Rng& rng);

    std::size_t scene_count() const noexcept { return scenes_; }
    std::size_t attribute_count() const noexcept { return rows_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    ad::Parameter& table(std::size_t attribute) { return *tables_.at(attribute); }
    const ad::Parameter& table(std::size_t attribute) const { return *tables_.at(attribute); }
    std::size_t rows_per_scene(std::size_t attribute) const { return rows_.at(attribute); }

    // EMB_scene(f): [n × d] for n (scene, attribute-values) pairs.
    ad::Var embed(ad::Tape& tape, std::span<const std::size_t> scenes,
                  std::span<const std::vector<std::uint32_t>> attributes) const;

private:
    std::size_t scenes_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::size_t> rows_;
    std::vector<ad::Parameter*> tables_;
};

// E_cfr = Σ_i S_i · EMB_{similar_i}(f_target).
// weights [B × K]; similar holds B·K scene indices (example-major, padded slots
// may hold any known scene and must carry S = 0); target_attributes has B rows.
ad::Var cfr_forward(ad::Tape& tape, ad::Var weights, std::span<const std::size_t> similar,
                    std::span<const std::vector<std::uint32_t>> target_attributes, const CfrTables& tables);

// E_in = E_o ⊕ E_u ⊕ Vec_san ⊕ (E_t + E_cfr).
ad::Var assemble_input(ad::Var e_o, ad::Var e_u, ad::Var vec_san, ad::Var e_t, ad::Var e_cfr);

}  // namespace swan::cfr
