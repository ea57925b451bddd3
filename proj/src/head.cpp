#include "swan/head.hpp"

#include "swan/error.hpp"

namespace swan::head {

HeadParams::HeadParams(nn::ParamStore& store, const HeadShape& shape, nn::Rng& rng)
    : gate(store, "head.gate", shape.input_width, shape.gate_hidden, shape.experts, rng),
      final_mlp(store, "head.final", shape.expert_out, shape.final_hidden, 1, rng),
      gate_softmax(shape.gate_softmax) {}

ad::Var decide(ad::Tape& tape, ad::Var e_in, std::span<const ad::Var> seg, std::span<const ad::Var> aeg, ad::Var w,
               const HeadParams& params) {
    const std::size_t experts = seg.size() + aeg.size();
    if (experts == 0) throw ArgumentError("decide: no experts");
    if (params.gate.out_width() != experts) {
        throw DimensionError("decide: gate produces " + std::to_string(params.gate.out_width()) + " values for " +
                             std::to_string(experts) + " experts");
    }
    if (!aeg.empty() && (w.tape == nullptr || w.cols() != aeg.size() || w.rows() != e_in.rows()))
        throw DimensionError("decide: selector weights must be [B x N_a]");

    ad::Var logits = params.gate.forward(tape, e_in);
    ad::Var gates = params.gate_softmax ? ad::softmax(logits) : logits;
    const std::size_t width = params.final_mlp.in_width();

    ad::Var combined;
    bool first = true;
    auto accumulate = [&](ad::Var coef, ad::Var vec) {
        if (vec.cols() != width || vec.rows() != e_in.rows())
            throw DimensionError("decide: expert output " + ad::shape_string(vec.shape()) + " does not match head width");
        ad::Var term = ad::mul(ad::repeat_cols(coef, width), vec);
        combined = first ? term : ad::add(combined, term);
        first = false;
    };
    for (std::size_t i = 0; i < seg.size(); ++i) accumulate(ad::slice_cols(gates, i, i + 1), seg[i]);
    for (std::size_t i = 0; i < aeg.size(); ++i) {
        const std::size_t g = seg.size() + i;
        accumulate(ad::mul(ad::slice_cols(gates, g, g + 1), ad::slice_cols(w, i, i + 1)), aeg[i]);
    }
    return ad::sigmoid(params.final_mlp.forward(tape, combined));
}

ad::Var ce_loss(ad::Var labels, ad::Var yhat) {
    if (labels.shape() != yhat.shape()) {
        throw DimensionError("ce_loss: labels " + ad::shape_string(labels.shape()) + " vs predictions " +
                             ad::shape_string(yhat.shape()));
    }
    ad::Var p = ad::clamp(yhat, kProbabilityClamp, 1.0 - kProbabilityClamp);
    ad::Var pos = ad::mul(labels, ad::log(p));
    ad::Var neg = ad::mul(ad::affine(labels, -1.0, 1.0), ad::log(ad::affine(p, -1.0, 1.0)));
    return ad::scale(ad::mean(ad::add(pos, neg)), -1.0);
}

ad::Var cos_loss(ad::Tape& tape, std::span<const ad::Var> aeg_outputs) {
    if (aeg_outputs.empty()) throw ArgumentError("cos_loss: no expert outputs");
    const std::size_t rows = aeg_outputs[0].rows();
    if (aeg_outputs.size() == 1) return tape.constant(ad::Tensor::scalar(0.0));
    ad::Var total;
    bool first = true;
    for (std::size_t m = 0; m < aeg_outputs.size(); ++m) {
        for (std::size_t n = m + 1; n < aeg_outputs.size(); ++n) {
            ad::Var c = ad::abs(ad::cosine_rows(aeg_outputs[m], aeg_outputs[n]));
            total = first ? c : ad::add(total, c);
            first = false;
        }
    }
    // Each unordered pair stands for (m, n) and (n, m).
    return ad::scale(ad::sum(total), 2.0 / static_cast<double>(rows));
}

ad::Var var_loss(ad::Var w, VarLossSign sign) {
    const std::size_t n = w.cols();
    if (n == 0) throw ArgumentError("var_loss: empty gate vector");
    ad::Var mean_row = ad::scale(ad::row_sum(w), 1.0 / static_cast<double>(n));
    ad::Var centered = ad::sub(w, n == 1 ? mean_row : ad::repeat_cols(mean_row, n));
    ad::Var sq = ad::mul(centered, centered);
    // mean over all B·N entries = (1/B) Σ_rows Var_pop(row)
    ad::Var var = ad::mean(sq);
    return sign == VarLossSign::Negated ? ad::scale(var, -1.0) : var;
}

ad::Var total_loss(ad::Var ce, ad::Var cos, ad::Var var, const LossWeights& weights) {
    if (weights.alpha <= 0.0 || weights.beta < 0.0 || weights.gamma < 0.0)
        throw ArgumentError("total_loss: require alpha > 0 and beta, gamma >= 0");
    return ad::add(ad::add(ad::scale(ce, weights.alpha), ad::scale(cos, weights.beta)), ad::scale(var, weights.gamma));
}

}  // namespace swan::head
