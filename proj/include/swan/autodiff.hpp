#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major tensors.
//
// A Tape records every op in insertion order; backward() walks the records
// once in reverse and accumulates gradients additively. There is no implicit
// broadcasting: shape adaptation goes through repeat_rows / repeat_cols /
// reshape. Any tensor is viewed as [rows × cols] where cols is the last
// dimension and rows the product of the others.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swan::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor row(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
    std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double item() const;

    bool requires_grad() const noexcept { return requires_grad_; }
    Tensor& set_requires_grad(bool on) noexcept {
        requires_grad_ = on;
        return *this;
    }

    bool all_finite() const noexcept;
    void fill(double v);

private:
    Shape shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
};

// A learnable tensor owned outside any tape. Gradients from every tape the
// parameter was recorded on accumulate into `grad` until zero_grad().
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v);
    void zero_grad();
};

enum class Op : std::uint8_t {
    Leaf,
    Param,
    MatMul,
    Add,
    Sub,
    Mul,
    Affine,
    Concat,
    SliceCols,
    Sigmoid,
    Relu,
    Log,
    Abs,
    Clamp,
    Softmax,
    Sum,
    Mean,
    RowSum,
    Reshape,
    RepeatRows,
    RepeatCols,
    GatherRows,
    GroupSumRows,
    CosineRows,
};

const char* op_name(Op op) noexcept;

class Tape;

// Handle to a recorded node. Cheap to copy; valid while its tape is alive.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

class Tape {
public:
    struct Node {
        Op op = Op::Leaf;
        std::vector<std::size_t> inputs;
        Tensor value;
        // Saved state for backward: softmax mask, gather indices, op scalars.
        std::vector<double> mask;
        std::vector<std::size_t> index;
        double a = 0.0;
        double b = 0.0;
        std::size_t n = 0;
        std::size_t m = 0;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    Var constant(Tensor t);
    Var leaf(Tensor t, bool requires_grad = true);
    // The parameter must outlive the tape; its value is read in place.
    Var param(Parameter& p);

    const Tensor& value(std::size_t id) const;
    const Tensor& value(Var v) const { return value(v.id); }
    // Gradient of the last backward() target with respect to v. Zero-filled
    // for nodes that require grad but were not reached.
    const Tensor& grad(Var v) const;

    // Reverse sweep from a scalar loss. Parameter leaves accumulate into
    // Parameter::grad. Calling twice without reset_grad() is an error.
    void backward(Var loss);
    void reset_grad();

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t id) const { return nodes_.at(id); }

    Var record(Node node);

private:
    void backprop_node(std::size_t id);
    Tensor& grad_slot(std::size_t id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool backward_done_ = false;
};

// Operations. All throw DimensionError on shape disagreement and record a node
// on the tape shared by their inputs.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// scale·x + shift, elementwise.
Var affine(Var x, double scale, double shift = 0.0);
inline Var scale(Var x, double s) { return affine(x, s, 0.0); }
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var sigmoid(Var x);
Var relu(Var x);
Var log(Var x);
Var abs(Var x);
Var clamp(Var x, double lo, double hi);
// Softmax over the last axis, max-subtracted.
Var softmax(Var x);
// Softmax over the last axis restricted to entries with mask != 0; masked
// entries are 0 and a fully masked row is all zeros.
Var masked_softmax(Var x, std::vector<double> mask);
Var sum(Var x);
Var mean(Var x);
// [r × c] → [r × 1]
Var row_sum(Var x);
Var reshape(Var x, Shape shape);
// Each row repeated `times` times consecutively: [r × c] → [r·times × c].
Var repeat_rows(Var x, std::size_t times);
// Each element repeated `times` times along the last axis: [r × c] → [r × c·times].
Var repeat_cols(Var x, std::size_t times);
// Rows of a [V × d] table: → [indices.size() × d]. Backward scatter-adds.
Var gather_rows(Var table, std::vector<std::size_t> indices);
// Sums consecutive groups of `group` rows: [r·group × c] → [r × c].
Var group_sum_rows(Var x, std::size_t group);
// Row-wise cosine similarity: [r × c], [r × c] → [r × 1]. A row pair where
// either side has zero norm yields 0 with zero gradient.
Var cosine_rows(Var a, Var b);

// Scalar logistic function, overflow-safe.
double logistic(double z) noexcept;

}  // namespace swan::ad
