#pragma once

// Minimal reverse-mode automatic differentiation over dense f64 tensors.
//
// A Tape records every operation in execution order. Each node keeps its op
// kind, input ids, scalar attributes and computed value, which is enough to
// (a) run the usual adjoint sweep, (b) replay the same graph on different
// leaf values, and (c) propagate DeepLIFT multipliers between two replays.
//
// Broadcasting for add/sub/mul/div aligns trailing dimensions: shapes are
// right-aligned, missing leading dimensions count as 1, and a dimension of 1
// stretches to match the other operand. Gradients are summed back over the
// stretched dimensions.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simgat::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Shape mismatch or other structural misuse of an op.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity appeared in an op output while finite-checking is on.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
    static Tensor vector(std::vector<double> v) {
        Shape s{v.size()};
        return Tensor(std::move(s), std::move(v));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        return Tensor({rows, cols}, std::move(v));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    /// Value of a single-element tensor.
    double item() const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,
    Concat,
    Slice,
    Transpose,
    Reshape,
    Sum,
    SumAxis,
    Mean,
    Exp,
    Ln,
    Sigmoid,
    Tanh,
    LeakyRelu,
    Softplus,
    Softmax,
};

const char* op_name(Op op);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

struct OpAttrs {
    int axis = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    double scalar = 0.0;
    Shape shape;
};

class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf node. Parameters are leaves with requires_grad; data inputs may
    /// also be leaves so they can be attributed or replaced on replay.
    Var leaf(Tensor value, std::string label = {});
    /// Leaf that never receives a gradient.
    Var constant(Tensor value);

    Var record(Op op, std::vector<std::size_t> inputs, OpAttrs attrs = {});

    std::size_t size() const noexcept { return nodes_.size(); }
    const Tensor& value(std::size_t id) const { return values_.at(id); }
    std::span<const Tensor> values() const noexcept { return values_; }
    Op op(std::size_t id) const { return nodes_.at(id).op; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
    const std::string& label(std::size_t id) const { return nodes_.at(id).label; }
    void set_label(Var v, std::string label);
    bool is_constant(std::size_t id) const { return nodes_.at(id).constant; }

    /// Ids of all nodes carrying `label`, in creation order.
    std::vector<std::size_t> find(const std::string& label) const;

    void set_check_finite(bool on) noexcept { check_finite_ = on; }
    bool check_finite() const noexcept { return check_finite_; }

    /// Adjoint sweep from a scalar output. Gradients accumulate in grad().
    void backward(Var output);
    /// Adjoint sweep with an explicit seed of the output's shape.
    void backward(Var output, const Tensor& seed);
    const Tensor& grad(Var v) const;
    const Tensor& grad(std::size_t id) const;
    void zero_grad();

    /// Recomputes every node value. Entries in `overrides` replace the value
    /// of that node (leaf or intermediate) before its consumers run.
    std::vector<Tensor> replay(const std::map<std::size_t, Tensor>& overrides) const;

    /// Reverse sweep generalised to two evaluations of the same graph.
    /// Elementwise nonlinearities use the secant slope between `values` and
    /// `reference` (falling back to the derivative at the midpoint when the
    /// input difference is below 1e-7); products and quotients use midpoint
    /// values so each node's local decomposition sums exactly to its delta.
    /// Passing the same values twice yields ordinary gradients. Nodes in
    /// `frozen` do not propagate. Returns one multiplier tensor per node
    /// (empty where nothing flowed).
    std::vector<Tensor> propagate(std::size_t output, const Tensor& seed,
                                  std::span<const Tensor> values,
                                  std::span<const Tensor> reference,
                                  const std::set<std::size_t>& frozen = {}) const;

    /// Threshold below which secant slopes fall back to the derivative.
    static constexpr double kRescaleEpsilon = 1e-7;

private:
    struct Node {
        Op op = Op::Leaf;
        std::vector<std::size_t> inputs;
        OpAttrs attrs;
        std::string label;
        bool constant = false;
        // True when some non-constant leaf feeds this node.
        bool live = false;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
    bool check_finite_;
};

// Forward ops. All inputs must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double k);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var sum(Var a);
/// Sum over one axis, keeping it with extent 1.
Var sum(Var a, int axis);
Var mean(Var a);
Var exp(Var a);
/// Natural log of max(a, floor); the gradient is zero where the floor binds.
Var ln(Var a, double floor = 0.0);
Var sigmoid(Var a);
Var tanh(Var a);
Var leaky_relu(Var a, double slope);
Var softplus(Var a);
/// Softmax along `axis`, computed with max subtraction.
Var softmax(Var a, int axis);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator*(double k, Var a) { return scale(a, k); }

/// Result shape when broadcasting `a` against `b`; throws ShapeError.
Shape broadcast_shape(const Shape& a, const Shape& b);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct GradCheckEntry {
    std::string name;
    std::size_t count = 0;
    double max_rel_error = 0.0;
    double max_abs_grad = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    double step = 0.0;
    double tolerance = 0.0;
    double max_rel_error = 0.0;
    bool pass = true;
    std::vector<GradCheckEntry> entries;
};

/// Builds a scalar loss on the given tape from one leaf per parameter.
using LossClosure = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares reverse-mode gradients with central differences of step `h`.
/// Relative error per entry is |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
GradCheckReport grad_check(const LossClosure& closure, const std::vector<NamedTensor>& params,
                           double h, double tolerance);

}  // namespace simgat::ad
