#include "swan/cfr.hpp"

#include <algorithm>

#include "swan/error.hpp"

namespace swan::cfr {

CfrTables::CfrTables(nn::ParamStore& store, std::size_t scenes, std::span<const std::size_t> attribute_rows,
                     std::size_t dim, nn::Rng& rng)
    : scenes_(scenes), dim_(dim), rows_(attribute_rows.begin(), attribute_rows.end()) {
    if (scenes == 0) throw ArgumentError("cfr: no known scenes");
    for (std::size_t a = 0; a < rows_.size(); ++a) {
        tables_.push_back(&store.add("cfr.attr" + std::to_string(a),
                                     nn::uniform_tensor({scenes * rows_[a], dim}, -0.05, 0.05, rng)));
    }
}

ad::Var CfrTables::embed(ad::Tape& tape, std::span<const std::size_t> scenes,
                         std::span<const std::vector<std::uint32_t>> attributes) const {
    if (tables_.empty()) throw ConfigError("cfr: no scene-attribute features to embed");
    if (scenes.size() != attributes.size()) throw DimensionError("cfr: scene and attribute lists differ in length");
    ad::Var out;
    for (std::size_t a = 0; a < tables_.size(); ++a) {
        std::vector<std::size_t> idx(scenes.size());
        for (std::size_t r = 0; r < scenes.size(); ++r) {
            if (scenes[r] >= scenes_)
                throw ConfigError("cfr: similar scene #" + std::to_string(scenes[r]) + " has no table set");
            if (attributes[r].size() != tables_.size())
                throw DimensionError("cfr: target has " + std::to_string(attributes[r].size()) +
                                     " scene attributes, tables cover " + std::to_string(tables_.size()));
            const std::size_t v = std::min<std::size_t>(attributes[r][a], rows_[a] - 1);
            idx[r] = scenes[r] * rows_[a] + v;
        }
        ad::Var part = ad::gather_rows(tape.param(*tables_[a]), std::move(idx));
        out = a == 0 ? part : ad::add(out, part);
    }
    return out;
}

ad::Var cfr_forward(ad::Tape& tape, ad::Var weights, std::span<const std::size_t> similar,
                    std::span<const std::vector<std::uint32_t>> target_attributes, const CfrTables& tables) {
    const std::size_t batch = weights.rows();
    const std::size_t slots = weights.cols();
    if (similar.size() != batch * slots) {
        throw DimensionError("cfr_forward: " + std::to_string(similar.size()) + " similar ids for weights " +
                             ad::shape_string(weights.shape()));
    }
    if (target_attributes.size() != batch) throw DimensionError("cfr_forward: one attribute row per example required");
    std::vector<std::vector<std::uint32_t>> expanded;
    expanded.reserve(batch * slots);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < slots; ++j) expanded.push_back(target_attributes[b]);
    ad::Var emb = tables.embed(tape, similar, expanded);
    ad::Var w = ad::repeat_cols(ad::reshape(weights, {batch * slots, 1}), tables.dim());
    return ad::group_sum_rows(ad::mul(w, emb), slots);
}

ad::Var assemble_input(ad::Var e_o, ad::Var e_u, ad::Var vec_san, ad::Var e_t, ad::Var e_cfr) {
    if (e_t.shape() != e_cfr.shape() || e_t.shape() != vec_san.shape()) {
        throw DimensionError("assemble_input: E_t " + ad::shape_string(e_t.shape()) + ", E_cfr " +
                             ad::shape_string(e_cfr.shape()) + ", Vec_san " + ad::shape_string(vec_san.shape()) +
                             " must agree");
    }
    return ad::concat({e_o, e_u, vec_san, ad::add(e_t, e_cfr)});
}

}  // namespace swan::cfr
