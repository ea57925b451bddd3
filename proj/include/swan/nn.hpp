#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "swan/autodiff.hpp"

namespace swan::nn {

using Rng = std::mt19937_64;

// Owns every learnable tensor of a model. Insertion order is the
// serialization order; references stay valid for the store's lifetime.
class ParamStore {
public:
    ad::Parameter& add(std::string name, ad::Tensor value);
    ad::Parameter& get(const std::string& name);
    const ad::Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const noexcept;
    void zero_grad();

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::deque<ad::Parameter> params_;
};

ad::Tensor uniform_tensor(ad::Shape shape, double lo, double hi, Rng& rng);

// Fully connected stack: ReLU after every hidden layer, linear output.
class Mlp {
public:
    Mlp() = default;
    Mlp(ParamStore& store, const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
        std::size_t out, Rng& rng);

    ad::Var forward(ad::Tape& tape, ad::Var x) const;

    std::size_t in_width() const noexcept { return in_; }
    std::size_t out_width() const noexcept { return out_; }
    std::size_t layer_count() const noexcept { return weights_.size(); }
    ad::Parameter& weight(std::size_t layer) { return *weights_.at(layer); }
    ad::Parameter& bias(std::size_t layer) { return *biases_.at(layer); }

private:
    std::size_t in_ = 0;
    std::size_t out_ = 0;
    std::vector<ad::Parameter*> weights_;
    std::vector<ad::Parameter*> biases_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(ParamStore& store, AdamConfig config);
    // Applies one update from the accumulated gradients.
    void step();
    std::uint64_t steps() const noexcept { return t_; }

private:
    ParamStore* store_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::uint64_t t_ = 0;
};

}  // namespace swan::nn
