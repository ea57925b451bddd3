#include "swan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "swan/error.hpp"
#include "swan/kernels.hpp"

namespace swan::ad {

namespace {

std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw ArgumentError("operation on a detached Var");
    return *a.tape;
}

Tape& tape_of(Var a, Var b) {
    if (a.tape != b.tape) throw ArgumentError("operands recorded on different tapes");
    return tape_of(a);
}

Shape with_last(const Shape& s, std::size_t last) {
    Shape out = s;
    if (out.empty()) out.push_back(last);
    else out.back() = last;
    return out;
}

Tape::Node make_node(Op op, std::vector<std::size_t> inputs, Tensor value, const Tape& tape) {
    Tape::Node node;
    node.op = op;
    node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                     [&](std::size_t i) { return tape.node(i).requires_grad; });
    node.inputs = std::move(inputs);
    node.value = std::move(value);
    return node;
}

void add_into(Tensor& dst, std::span<const double> src) {
    auto d = dst.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

double logistic(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    if (shape_.empty() || std::find(shape_.begin(), shape_.end(), 0) != shape_.end()) {
        throw DimensionError("tensor shape must be non-empty with positive dimensions, got " +
                             shape_string(shape_));
    }
    data_.assign(product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty() || std::find(shape_.begin(), shape_.end(), 0) != shape_.end()) {
        throw DimensionError("tensor shape must be non-empty with positive dimensions, got " +
                             shape_string(shape_));
    }
    if (product(shape_) != data_.size()) {
        throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({1, n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
}

double Tensor::item() const {
    if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    value.set_requires_grad(true);
    grad = Tensor(value.shape(), 0.0);
}

void Parameter::zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
    else grad.fill(0.0);
}

const char* op_name(Op op) noexcept {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Param: return "param";
        case Op::MatMul: return "matmul";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Affine: return "affine";
        case Op::Concat: return "concat";
        case Op::SliceCols: return "slice_cols";
        case Op::Sigmoid: return "sigmoid";
        case Op::Relu: return "relu";
        case Op::Log: return "log";
        case Op::Abs: return "abs";
        case Op::Clamp: return "clamp";
        case Op::Softmax: return "softmax";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::RowSum: return "row_sum";
        case Op::Reshape: return "reshape";
        case Op::RepeatRows: return "repeat_rows";
        case Op::RepeatCols: return "repeat_cols";
        case Op::GatherRows: return "gather_rows";
        case Op::GroupSumRows: return "group_sum_rows";
        case Op::CosineRows: return "cosine_rows";
    }
    return "?";
}

const Tensor& Var::value() const { return tape_of(*this).value(id); }

// ---------------------------------------------------------------- Tape

Var Tape::record(Node node) {
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor t) { return leaf(std::move(t), false); }

Var Tape::leaf(Tensor t, bool requires_grad) {
    Node node;
    node.op = Op::Leaf;
    node.requires_grad = requires_grad;
    t.set_requires_grad(requires_grad);
    node.value = std::move(t);
    return record(std::move(node));
}

Var Tape::param(Parameter& p) {
    Node node;
    node.op = Op::Param;
    node.param = &p;
    node.requires_grad = true;
    return record(std::move(node));
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.op == Op::Param ? n.param->value : n.value;
}

const Tensor& Tape::grad(Var v) const {
    static const Tensor kEmpty;
    if (v.id >= grads_.size()) return kEmpty;
    return grads_[v.id];
}

Tensor& Tape::grad_slot(std::size_t id) {
    Tensor& g = grads_[id];
    if (g.empty()) g = Tensor(value(id).shape(), 0.0);
    return g;
}

void Tape::reset_grad() {
    grads_.clear();
    backward_done_ = false;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw ArgumentError("backward: loss was recorded on another tape");
    if (value(loss.id).size() != 1) {
        throw ArgumentError("backward: loss must be scalar, got shape " + shape_string(value(loss.id).shape()));
    }
    if (backward_done_) throw std::logic_error("backward: called twice without reset_grad()");
    backward_done_ = true;
    grads_.assign(nodes_.size(), Tensor{});
    grads_[loss.id] = Tensor(value(loss.id).shape(), 1.0);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        if (!nodes_[id].requires_grad || grads_[id].empty()) continue;
        backprop_node(id);
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (nodes_[id].requires_grad && grads_[id].empty()) grads_[id] = Tensor(value(id).shape(), 0.0);
    }
}

void Tape::backprop_node(std::size_t id) {
    const Node& node = nodes_[id];
    const Tensor& g = grads_[id];
    const auto needs = [&](std::size_t k) { return nodes_[node.inputs[k]].requires_grad; };

    switch (node.op) {
        case Op::Leaf:
            break;
        case Op::Param: {
            Parameter& p = *node.param;
            if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape(), 0.0);
            add_into(p.grad, g.data());
            break;
        }
        case Op::MatMul: {
            const Tensor& a = value(node.inputs[0]);
            const Tensor& b = value(node.inputs[1]);
            const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
            if (needs(0)) kernels::matmul_nt_acc(g.data(), b.data(), grad_slot(node.inputs[0]).data(), m, k, n);
            if (needs(1)) kernels::matmul_tn_acc(a.data(), g.data(), grad_slot(node.inputs[1]).data(), m, k, n);
            break;
        }
        case Op::Add:
        case Op::Sub: {
            if (needs(0)) add_into(grad_slot(node.inputs[0]), g.data());
            if (needs(1)) {
                auto d = grad_slot(node.inputs[1]).data();
                const double sign = node.op == Op::Add ? 1.0 : -1.0;
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign * g[i];
            }
            break;
        }
        case Op::Mul: {
            const Tensor& a = value(node.inputs[0]);
            const Tensor& b = value(node.inputs[1]);
            if (needs(0)) {
                auto d = grad_slot(node.inputs[0]).data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * b[i];
            }
            if (needs(1)) {
                auto d = grad_slot(node.inputs[1]).data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * a[i];
            }
            break;
        }
        case Op::Affine: {
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.a * g[i];
            break;
        }
        case Op::Concat: {
            const std::size_t rows = g.rows(), total = g.cols();
            for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                if (!needs(k)) continue;
                const std::size_t off = node.index[k];
                const std::size_t width = value(node.inputs[k]).cols();
                auto d = grad_slot(node.inputs[k]).data();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < width; ++c) d[r * width + c] += g[r * total + off + c];
            }
            break;
        }
        case Op::SliceCols: {
            const std::size_t begin = node.n, width = g.cols(), rows = g.rows();
            auto d = grad_slot(node.inputs[0]).data();
            const std::size_t in_cols = value(node.inputs[0]).cols();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < width; ++c) d[r * in_cols + begin + c] += g[r * width + c];
            break;
        }
        case Op::Sigmoid: {
            const Tensor& y = node.value;
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
        }
        case Op::Relu: {
            const Tensor& x = value(node.inputs[0]);
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t i = 0; i < d.size(); ++i)
                if (x[i] > 0.0) d[i] += g[i];
            break;
        }
        case Op::Log: {
            const Tensor& x = value(node.inputs[0]);
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] / x[i];
            break;
        }
        case Op::Abs: {
            const Tensor& x = value(node.inputs[0]);
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (x[i] > 0.0) d[i] += g[i];
                else if (x[i] < 0.0) d[i] -= g[i];
            }
            break;
        }
        case Op::Clamp: {
            const Tensor& x = value(node.inputs[0]);
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t i = 0; i < d.size(); ++i)
                if (x[i] > node.a && x[i] < node.b) d[i] += g[i];
            break;
        }
        case Op::Softmax: {
            const Tensor& y = node.value;
            const std::size_t rows = y.rows(), cols = y.cols();
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dot += y[r * cols + c] * g[r * cols + c];
                for (std::size_t c = 0; c < cols; ++c) {
                    const std::size_t i = r * cols + c;
                    d[i] += y[i] * (g[i] - dot);
                }
            }
            break;
        }
        case Op::Sum:
        case Op::Mean: {
            auto d = grad_slot(node.inputs[0]).data();
            const double s = node.op == Op::Sum ? g[0] : g[0] / static_cast<double>(d.size());
            for (double& v : d) v += s;
            break;
        }
        case Op::RowSum: {
            auto d = grad_slot(node.inputs[0]).data();
            const std::size_t cols = value(node.inputs[0]).cols();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i / cols];
            break;
        }
        case Op::Reshape:
            add_into(grad_slot(node.inputs[0]), g.data());
            break;
        case Op::RepeatRows: {
            const std::size_t times = node.n, cols = g.cols();
            auto d = grad_slot(node.inputs[0]).data();
            const std::size_t in_rows = d.size() / cols;
            for (std::size_t r = 0; r < in_rows; ++r)
                for (std::size_t t = 0; t < times; ++t)
                    for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[(r * times + t) * cols + c];
            break;
        }
        case Op::RepeatCols: {
            const std::size_t times = node.n;
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t i = 0; i < d.size(); ++i)
                for (std::size_t t = 0; t < times; ++t) d[i] += g[i * times + t];
            break;
        }
        case Op::GatherRows: {
            const std::size_t cols = g.cols();
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t r = 0; r < node.index.size(); ++r) {
                const std::size_t row = node.index[r];
                for (std::size_t c = 0; c < cols; ++c) d[row * cols + c] += g[r * cols + c];
            }
            break;
        }
        case Op::GroupSumRows: {
            const std::size_t group = node.n, cols = g.cols(), out_rows = g.rows();
            auto d = grad_slot(node.inputs[0]).data();
            for (std::size_t r = 0; r < out_rows; ++r)
                for (std::size_t t = 0; t < group; ++t)
                    for (std::size_t c = 0; c < cols; ++c) d[(r * group + t) * cols + c] += g[r * cols + c];
            break;
        }
        case Op::CosineRows: {
            const Tensor& a = value(node.inputs[0]);
            const Tensor& b = value(node.inputs[1]);
            const std::size_t rows = a.rows(), cols = a.cols();
            for (std::size_t r = 0; r < rows; ++r) {
                const double na = node.mask[2 * r], nb = node.mask[2 * r + 1];
                if (na == 0.0 || nb == 0.0) continue;
                const double cosv = node.value[r];
                const double gr = g[r];
                if (needs(0)) {
                    auto d = grad_slot(node.inputs[0]).data();
                    for (std::size_t c = 0; c < cols; ++c) {
                        const std::size_t i = r * cols + c;
                        d[i] += gr * (b[i] / (na * nb) - cosv * a[i] / (na * na));
                    }
                }
                if (needs(1)) {
                    auto d = grad_slot(node.inputs[1]).data();
                    for (std::size_t c = 0; c < cols; ++c) {
                        const std::size_t i = r * cols + c;
                        d[i] += gr * (a[i] / (na * nb) - cosv * b[i] / (nb * nb));
                    }
                }
            }
            break;
        }
    }
}

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    const Tensor& va = a.value();
    const Tensor& vb = b.value();
    if (va.shape().size() != 2 || vb.shape().size() != 2 || va.shape()[1] != vb.shape()[0]) {
        throw DimensionError("matmul: cannot multiply " + shape_string(va.shape()) + " by " +
                             shape_string(vb.shape()));
    }
    const std::size_t m = va.shape()[0], k = va.shape()[1], n = vb.shape()[1];
    Tensor out({m, n});
    kernels::matmul(va.data(), vb.data(), out.data(), m, k, n);
    return tape.record(make_node(Op::MatMul, {a.id, b.id}, std::move(out), tape));
}

namespace {

template <class F>
Var binary(Op op, const char* name, Var a, Var b, F f) {
    Tape& tape = tape_of(a, b);
    const Tensor& va = a.value();
    const Tensor& vb = b.value();
    require_same_shape(name, va, vb);
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(va[i], vb[i]);
    return tape.record(make_node(op, {a.id, b.id}, std::move(out), tape));
}

template <class F>
Var unary(Op op, Var x, F f) {
    Tape& tape = tape_of(x);
    const Tensor& vx = x.value();
    Tensor out(vx.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(vx[i]);
    return tape.record(make_node(op, {x.id}, std::move(out), tape));
}

}  // namespace

Var add(Var a, Var b) { return binary(Op::Add, "add", a, b, [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary(Op::Sub, "sub", a, b, [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary(Op::Mul, "mul", a, b, [](double x, double y) { return x * y; }); }

Var affine(Var x, double scale, double shift) {
    Tape& tape = tape_of(x);
    const Tensor& vx = x.value();
    Tensor out(vx.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * vx[i] + shift;
    auto node = make_node(Op::Affine, {x.id}, std::move(out), tape);
    node.a = scale;
    node.b = shift;
    return tape.record(std::move(node));
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw ArgumentError("concat: empty part list");
    Tape& tape = tape_of(parts[0]);
    const Tensor& first = parts[0].value();
    const std::size_t rows = first.rows();
    const Shape lead(first.shape().begin(), first.shape().end() - 1);
    std::size_t total = 0;
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        (void)tape_of(parts[0], p);
        const Tensor& v = p.value();
        if (Shape(v.shape().begin(), v.shape().end() - 1) != lead) {
            throw DimensionError("concat: part shape " + shape_string(v.shape()) + " incompatible with " +
                                 shape_string(first.shape()));
        }
        offsets.push_back(total);
        ids.push_back(p.id);
        total += v.cols();
    }
    Tensor out(with_last(first.shape(), total));
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        const std::size_t width = v.cols();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(r * width), width,
                        out.data().begin() + static_cast<std::ptrdiff_t>(r * total + offsets[k]));
    }
    auto node = make_node(Op::Concat, std::move(ids), std::move(out), tape);
    node.index = std::move(offsets);
    return tape.record(std::move(node));
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
    Tape& tape = tape_of(x);
    const Tensor& v = x.value();
    if (begin >= end || end > v.cols()) {
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") invalid for shape " + shape_string(v.shape()));
    }
    const std::size_t width = end - begin, rows = v.rows(), cols = v.cols();
    Tensor out(with_last(v.shape(), width));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c) out[r * width + c] = v[r * cols + begin + c];
    auto node = make_node(Op::SliceCols, {x.id}, std::move(out), tape);
    node.n = begin;
    return tape.record(std::move(node));
}

Var sigmoid(Var x) { return unary(Op::Sigmoid, x, [](double v) { return logistic(v); }); }
Var relu(Var x) { return unary(Op::Relu, x, [](double v) { return v > 0.0 ? v : 0.0; }); }
Var log(Var x) { return unary(Op::Log, x, [](double v) { return std::log(v); }); }
Var abs(Var x) { return unary(Op::Abs, x, [](double v) { return std::fabs(v); }); }

Var clamp(Var x, double lo, double hi) {
    if (!(lo < hi)) throw ArgumentError("clamp: lower bound must be below upper bound");
    Tape& tape = tape_of(x);
    const Tensor& vx = x.value();
    Tensor out(vx.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(vx[i], lo, hi);
    auto node = make_node(Op::Clamp, {x.id}, std::move(out), tape);
    node.a = lo;
    node.b = hi;
    return tape.record(std::move(node));
}

Var masked_softmax(Var x, std::vector<double> mask) {
    Tape& tape = tape_of(x);
    const Tensor& v = x.value();
    if (mask.size() != v.size()) {
        throw DimensionError("masked_softmax: mask of " + std::to_string(mask.size()) + " entries for shape " +
                             shape_string(v.shape()));
    }
    const std::size_t rows = v.rows(), cols = v.cols();
    Tensor out(v.shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c)
            if (mask[r * cols + c] != 0.0) mx = std::max(mx, v[r * cols + c]);
        if (!std::isfinite(mx)) continue;
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            if (mask[i] == 0.0) continue;
            out[i] = std::exp(v[i] - mx);
            total += out[i];
        }
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= total;
    }
    auto node = make_node(Op::Softmax, {x.id}, std::move(out), tape);
    node.mask = std::move(mask);
    return tape.record(std::move(node));
}

Var softmax(Var x) { return masked_softmax(x, std::vector<double>(x.value().size(), 1.0)); }

Var sum(Var x) {
    Tape& tape = tape_of(x);
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return tape.record(make_node(Op::Sum, {x.id}, Tensor::scalar(s), tape));
}

Var mean(Var x) {
    Tape& tape = tape_of(x);
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    s /= static_cast<double>(x.value().size());
    return tape.record(make_node(Op::Mean, {x.id}, Tensor::scalar(s), tape));
}

Var row_sum(Var x) {
    Tape& tape = tape_of(x);
    const Tensor& v = x.value();
    const std::size_t rows = v.rows(), cols = v.cols();
    Tensor out(with_last(v.shape(), 1));
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += v[r * cols + c];
        out[r] = s;
    }
    return tape.record(make_node(Op::RowSum, {x.id}, std::move(out), tape));
}

Var reshape(Var x, Shape shape) {
    Tape& tape = tape_of(x);
    const Tensor& v = x.value();
    Tensor out(std::move(shape), v.storage());
    return tape.record(make_node(Op::Reshape, {x.id}, std::move(out), tape));
}

Var repeat_rows(Var x, std::size_t times) {
    if (times == 0) throw ArgumentError("repeat_rows: times must be positive");
    Tape& tape = tape_of(x);
    const Tensor& v = x.value();
    const std::size_t rows = v.rows(), cols = v.cols();
    Tensor out({rows * times, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t t = 0; t < times; ++t)
            std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
                        out.data().begin() + static_cast<std::ptrdiff_t>((r * times + t) * cols));
    auto node = make_node(Op::RepeatRows, {x.id}, std::move(out), tape);
    node.n = times;
    return tape.record(std::move(node));
}

Var repeat_cols(Var x, std::size_t times) {
    if (times == 0) throw ArgumentError("repeat_cols: times must be positive");
    Tape& tape = tape_of(x);
    const Tensor& v = x.value();
    Tensor out(with_last(v.shape(), v.cols() * times));
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t t = 0; t < times; ++t) out[i * times + t] = v[i];
    auto node = make_node(Op::RepeatCols, {x.id}, std::move(out), tape);
    node.n = times;
    return tape.record(std::move(node));
}

Var gather_rows(Var table, std::vector<std::size_t> indices) {
    Tape& tape = tape_of(table);
    const Tensor& t = table.value();
    if (t.shape().size() != 2) throw DimensionError("gather_rows: table must be 2-D, got " + shape_string(t.shape()));
    if (indices.empty()) throw ArgumentError("gather_rows: empty index list");
    const std::size_t rows = t.shape()[0], cols = t.shape()[1];
    Tensor out({indices.size(), cols});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= rows) {
            throw DimensionError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                                 shape_string(t.shape()));
        }
        std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(indices[r] * cols), cols,
                    out.data().begin() + static_cast<std::ptrdiff_t>(r * cols));
    }
    auto node = make_node(Op::GatherRows, {table.id}, std::move(out), tape);
    node.index = std::move(indices);
    return tape.record(std::move(node));
}

Var group_sum_rows(Var x, std::size_t group) {
    Tape& tape = tape_of(x);
    const Tensor& v = x.value();
    const std::size_t rows = v.rows(), cols = v.cols();
    if (group == 0 || rows % group != 0) {
        throw DimensionError("group_sum_rows: " + std::to_string(rows) + " rows not divisible into groups of " +
                             std::to_string(group));
    }
    Tensor out({rows / group, cols}, 0.0);
    for (std::size_t r = 0; r < rows / group; ++r)
        for (std::size_t t = 0; t < group; ++t)
            for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += v[(r * group + t) * cols + c];
    auto node = make_node(Op::GroupSumRows, {x.id}, std::move(out), tape);
    node.n = group;
    return tape.record(std::move(node));
}

Var cosine_rows(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    const Tensor& va = a.value();
    const Tensor& vb = b.value();
    require_same_shape("cosine_rows", va, vb);
    const std::size_t rows = va.rows(), cols = va.cols();
    Tensor out({rows, 1});
    std::vector<double> norms(2 * rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            dot += va[i] * vb[i];
            aa += va[i] * va[i];
            bb += vb[i] * vb[i];
        }
        norms[2 * r] = std::sqrt(aa);
        norms[2 * r + 1] = std::sqrt(bb);
        out[r] = (aa == 0.0 || bb == 0.0) ? 0.0 : dot / (norms[2 * r] * norms[2 * r + 1]);
    }
    auto node = make_node(Op::CosineRows, {a.id, b.id}, std::move(out), tape);
    node.mask = std::move(norms);
    return tape.record(std::move(node));
}

}  // namespace swan::ad
