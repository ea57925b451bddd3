#include "swan/san.hpp"

#include "swan/error.hpp"

namespace swan::san {

SanParams::SanParams(nn::ParamStore& store, std::size_t user_width_, std::size_t scene_width_,
                     const std::vector<std::size_t>& hidden, nn::Rng& rng)
    : score(store, "san.score", user_width_ + 3 * scene_width_, hidden, 1, rng),
      user_width(user_width_),
      scene_width(scene_width_) {}

SanOutput san_forward(ad::Tape& tape, ad::Var e_u, ad::Var e_t, std::span<const ad::Var> similar,
                      const SanParams& params) {
    if (similar.empty()) throw ArgumentError("san_forward: empty similar-scene list");
    if (e_u.rows() != 1 || e_t.rows() != 1) throw DimensionError("san_forward: expects single-row E_u and E_t");
    ad::Var e_s = similar.size() == 1 ? similar[0] : ad::reshape(ad::concat(similar), {similar.size(), e_t.cols()});
    return san_forward_batch(tape, e_u, e_t, e_s, similar.size(), std::vector<double>(similar.size(), 1.0), params);
}

SanOutput san_forward_batch(ad::Tape& tape, ad::Var e_u, ad::Var e_t, ad::Var e_s, std::size_t slots,
                            std::vector<double> mask, const SanParams& params) {
    const std::size_t batch = e_u.rows();
    const std::size_t d = e_t.cols();
    if (slots == 0) throw ArgumentError("san_forward: zero similar-scene slots");
    if (e_t.rows() != batch || e_s.rows() != batch * slots || e_s.cols() != d) {
        throw DimensionError("san_forward: E_u " + ad::shape_string(e_u.shape()) + ", E_t " +
                             ad::shape_string(e_t.shape()) + ", E_s " + ad::shape_string(e_s.shape()) +
                             " inconsistent with " + std::to_string(slots) + " slots");
    }
    if (e_u.cols() != params.user_width || d != params.scene_width) {
        throw DimensionError("san_forward: embedding widths do not match the score network");
    }
    ad::Var u = slots == 1 ? e_u : ad::repeat_rows(e_u, slots);
    ad::Var t = slots == 1 ? e_t : ad::repeat_rows(e_t, slots);
    ad::Var features = ad::concat({u, t, ad::sub(t, e_s), ad::mul(t, e_s)});
    ad::Var scores = ad::reshape(params.score.forward(tape, features), {batch, slots});
    ad::Var weights = ad::masked_softmax(scores, std::move(mask));
    ad::Var w = ad::repeat_cols(ad::reshape(weights, {batch * slots, 1}), d);
    ad::Var vec = ad::group_sum_rows(ad::mul(w, e_s), slots);
    return {weights, vec};
}

}  // namespace swan::san
