#include "swan/aem.hpp"

#include <cmath>

#include "swan/error.hpp"

namespace swan::aem {

AemParams::AemParams(nn::ParamStore& store, const AemShape& shape, nn::Rng& rng) : tau(shape.tau) {
    if (shape.adaptive < 1 || shape.shared < 1) throw ArgumentError("aem: N_a and N_s must be at least 1");
    if (!(shape.tau > 0.0)) throw ArgumentError("aem: temperature must be positive");
    for (std::size_t i = 0; i < shape.adaptive; ++i)
        aeg.emplace_back(store, "aeg" + std::to_string(i), shape.input_width, shape.expert_hidden, shape.expert_out, rng);
    for (std::size_t i = 0; i < shape.shared; ++i)
        seg.emplace_back(store, "seg" + std::to_string(i), shape.input_width, shape.expert_hidden, shape.expert_out, rng);
    selector = nn::Mlp(store, "selector.p", shape.user_width + shape.scene_width, shape.selector_hidden, shape.adaptive,
                       rng);
    threshold = nn::Mlp(store, "selector.thre", shape.scene_width, shape.threshold_hidden, 1, rng);
}

double dics(double p, double t, double tau) {
    if (!(tau > 0.0)) throw ArgumentError("dics: temperature must be positive, got " + std::to_string(tau));
    return ad::logistic((p - t) / tau);
}

ad::Var dics(ad::Var p, ad::Var t, double tau) {
    if (!(tau > 0.0)) throw ArgumentError("dics: temperature must be positive, got " + std::to_string(tau));
    if (t.cols() != 1 || t.rows() != p.rows())
        throw DimensionError("dics: threshold " + ad::shape_string(t.shape()) + " for probabilities " +
                             ad::shape_string(p.shape()));
    ad::Var tt = p.cols() == 1 ? t : ad::repeat_cols(t, p.cols());
    return ad::sigmoid(ad::scale(ad::sub(p, tt), 1.0 / tau));
}

SelectorOutput expert_selector(ad::Tape& tape, ad::Var e_u, ad::Var vec_san, const AemParams& params) {
    if (e_u.rows() != vec_san.rows()) throw DimensionError("expert_selector: E_u and Vec_san row counts differ");
    SelectorOutput out;
    out.p = ad::sigmoid(params.selector.forward(tape, ad::concat({e_u, vec_san})));
    out.t = ad::sigmoid(params.threshold.forward(tape, vec_san));
    out.w = dics(out.p, out.t, params.tau);
    return out;
}

namespace {

std::vector<ad::Var> run(ad::Tape& tape, ad::Var e_in, const std::vector<nn::Mlp>& experts) {
    std::vector<ad::Var> out;
    out.reserve(experts.size());
    for (const auto& e : experts) out.push_back(e.forward(tape, e_in));
    return out;
}

}  // namespace

std::vector<ad::Var> aeg_forward(ad::Tape& tape, ad::Var e_in, const AemParams& params) {
    return run(tape, e_in, params.aeg);
}

std::vector<ad::Var> seg_forward(ad::Tape& tape, ad::Var e_in, const AemParams& params) {
    return run(tape, e_in, params.seg);
}

}  // namespace swan::aem
