#include "swan/nn.hpp"

#include <algorithm>
#include <cmath>

#include "swan/error.hpp"

namespace swan::nn {

ad::Parameter& ParamStore::add(std::string name, ad::Tensor value) {
    if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
    return params_.emplace_back(std::move(name), std::move(value));
}

ad::Parameter& ParamStore::get(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return p;
    throw ConfigError("no parameter named " + name);
}

const ad::Parameter& ParamStore::get(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw ConfigError("no parameter named " + name);
}

bool ParamStore::contains(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.name == name; });
}

std::size_t ParamStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

ad::Tensor uniform_tensor(ad::Shape shape, double lo, double hi, Rng& rng) {
    ad::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

Mlp::Mlp(ParamStore& store, const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
         std::size_t out, Rng& rng)
    : in_(in), out_(out) {
    if (in == 0 || out == 0) throw ArgumentError("mlp " + name + ": widths must be positive");
    std::size_t prev = in;
    for (std::size_t layer = 0; layer <= hidden.size(); ++layer) {
        const std::size_t width = layer < hidden.size() ? hidden[layer] : out;
        const double bound = std::sqrt(6.0 / static_cast<double>(prev + width));
        weights_.push_back(&store.add(name + ".w" + std::to_string(layer),
                                      uniform_tensor({prev, width}, -bound, bound, rng)));
        biases_.push_back(&store.add(name + ".b" + std::to_string(layer), ad::Tensor({1, width}, 0.0)));
        prev = width;
    }
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var x) const {
    if (x.cols() != in_) {
        throw DimensionError("mlp: input width " + std::to_string(x.cols()) + " but layer expects " +
                             std::to_string(in_));
    }
    const std::size_t rows = x.rows();
    ad::Var h = x;
    for (std::size_t layer = 0; layer < weights_.size(); ++layer) {
        h = ad::add(ad::matmul(h, tape.param(*weights_[layer])),
                    ad::repeat_rows(tape.param(*biases_[layer]), rows));
        if (layer + 1 < weights_.size()) h = ad::relu(h);
    }
    return h;
}

Adam::Adam(ParamStore& store, AdamConfig config) : store_(&store), config_(config) {
    for (const auto& p : store) {
        m_.emplace_back(p.value.size(), 0.0);
        v_.emplace_back(p.value.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    for (auto& p : *store_) {
        auto& m = m_[k];
        auto& v = v_[k];
        ++k;
        auto value = p.value.data();
        auto grad = p.grad.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

}  // namespace swan::nn
