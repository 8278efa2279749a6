#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kernels.hpp"

namespace simgat::ad {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::MatMul: return "matmul";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Scale: return "scale";
        case Op::Concat: return "concat";
        case Op::Slice: return "slice";
        case Op::Transpose: return "transpose";
        case Op::Reshape: return "reshape";
        case Op::Sum: return "sum";
        case Op::SumAxis: return "sum_axis";
        case Op::Mean: return "mean";
        case Op::Exp: return "exp";
        case Op::Ln: return "ln";
        case Op::Sigmoid: return "sigmoid";
        case Op::Tanh: return "tanh";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Softplus: return "softplus";
        case Op::Softmax: return "softmax";
    }
    return "?";
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = da == 1 ? db : da;
    }
    return out;
}

namespace detail {

std::vector<std::size_t> broadcast_map(const Shape& out, const Shape& in) {
    const std::size_t rank = out.size();
    const std::size_t offset = rank - in.size();
    // Strides of `in` expressed on the output's axes; stretched axes get 0.
    std::vector<std::size_t> stride(rank, 0);
    std::size_t s = 1;
    for (std::size_t i = in.size(); i-- > 0;) {
        stride[i + offset] = in[i] == 1 ? 0 : s;
        s *= in[i];
    }
    const std::size_t total = shape_size(out);
    std::vector<std::size_t> map(total);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < total; ++k) {
        map[k] = pos;
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            pos += stride[d];
            if (idx[d] < out[d]) break;
            pos -= stride[d] * idx[d];
            idx[d] = 0;
        }
    }
    return map;
}

std::size_t normalize_axis(int axis, std::size_t rank) {
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
    }
    return static_cast<std::size_t>(a);
}

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

namespace {

void expect_arity(Op op, const std::vector<const Tensor*>& in, std::size_t n) {
    if (in.size() != n) {
        throw ShapeError(std::string(op_name(op)) + " expects " + std::to_string(n) + " inputs, got " +
                         std::to_string(in.size()));
    }
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename F>
Tensor unary(const Tensor& a, F f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, F f) {
    Shape shape = broadcast_shape(a.shape(), b.shape());
    const auto ma = broadcast_map(shape, a.shape());
    const auto mb = broadcast_map(shape, b.shape());
    Tensor out(std::move(shape));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(a[ma[k]], b[mb[k]]);
    return out;
}

}  // namespace

Shape infer_shape(Op op, const std::vector<const Tensor*>& in, const OpAttrs& attrs) {
    switch (op) {
        case Op::Leaf:
            return in.empty() ? Shape{} : in[0]->shape();
        case Op::MatMul: {
            expect_arity(op, in, 2);
            const auto& a = in[0]->shape();
            const auto& b = in[1]->shape();
            if (a.size() != 2 || b.size() != 2 || a[1] != b[0]) {
                throw ShapeError("matmul shape mismatch: " + shape_str(a) + " x " + shape_str(b));
            }
            return {a[0], b[1]};
        }
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
            expect_arity(op, in, 2);
            return broadcast_shape(in[0]->shape(), in[1]->shape());
        case Op::Concat: {
            if (in.empty()) throw ShapeError("concat of zero tensors");
            const auto& first = in[0]->shape();
            const std::size_t axis = normalize_axis(attrs.axis, first.size());
            Shape out = first;
            out[axis] = 0;
            for (const Tensor* t : in) {
                const auto& s = t->shape();
                bool ok = s.size() == first.size();
                for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
                if (!ok) throw ShapeError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
                out[axis] += s[axis];
            }
            return out;
        }
        case Op::Slice: {
            expect_arity(op, in, 1);
            const auto& s = in[0]->shape();
            const std::size_t axis = normalize_axis(attrs.axis, s.size());
            if (attrs.begin > attrs.end || attrs.end > s[axis]) {
                throw ShapeError("slice [" + std::to_string(attrs.begin) + "," + std::to_string(attrs.end) +
                                 ") out of range for " + shape_str(s));
            }
            Shape out = s;
            out[axis] = attrs.end - attrs.begin;
            return out;
        }
        case Op::Transpose: {
            expect_arity(op, in, 1);
            const auto& s = in[0]->shape();
            if (s.size() != 2) throw ShapeError("transpose needs a matrix, got " + shape_str(s));
            return {s[1], s[0]};
        }
        case Op::Reshape:
            expect_arity(op, in, 1);
            if (shape_size(attrs.shape) != in[0]->size()) {
                throw ShapeError("cannot reshape " + shape_str(in[0]->shape()) + " to " + shape_str(attrs.shape));
            }
            return attrs.shape;
        case Op::Sum:
        case Op::Mean:
            expect_arity(op, in, 1);
            return {};
        case Op::SumAxis: {
            expect_arity(op, in, 1);
            Shape out = in[0]->shape();
            out[normalize_axis(attrs.axis, out.size())] = 1;
            return out;
        }
        case Op::Softmax:
            expect_arity(op, in, 1);
            normalize_axis(attrs.axis, in[0]->rank());
            return in[0]->shape();
        case Op::Neg:
        case Op::Scale:
        case Op::Exp:
        case Op::Ln:
        case Op::Sigmoid:
        case Op::Tanh:
        case Op::LeakyRelu:
        case Op::Softplus:
            expect_arity(op, in, 1);
            return in[0]->shape();
    }
    throw ShapeError("unknown op");
}

Tensor compute(Op op, const std::vector<const Tensor*>& in, const OpAttrs& attrs) {
    switch (op) {
        case Op::Leaf:
            return *in.at(0);
        case Op::MatMul: {
            const Tensor& a = *in[0];
            const Tensor& b = *in[1];
            const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
            Tensor out({n, m});
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = a[i * k + p];
                    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += av * b[p * m + j];
                }
            }
            return out;
        }
        case Op::Add: return binary(*in[0], *in[1], [](double x, double y) { return x + y; });
        case Op::Sub: return binary(*in[0], *in[1], [](double x, double y) { return x - y; });
        case Op::Mul: return binary(*in[0], *in[1], [](double x, double y) { return x * y; });
        case Op::Div: return binary(*in[0], *in[1], [](double x, double y) { return x / y; });
        case Op::Neg: return unary(*in[0], [](double x) { return -x; });
        case Op::Scale: {
            const double k = attrs.scalar;
            return unary(*in[0], [k](double x) { return k * x; });
        }
        case Op::Concat: {
            Shape shape = infer_shape(op, in, attrs);
            const std::size_t axis = normalize_axis(attrs.axis, shape.size());
            const AxisSplit out_split = split_axis(shape, axis);
            Tensor out(shape);
            std::size_t offset = 0;
            for (const Tensor* t : in) {
                const AxisSplit s = split_axis(t->shape(), axis);
                for (std::size_t o = 0; o < s.outer; ++o) {
                    for (std::size_t k = 0; k < s.len; ++k) {
                        for (std::size_t i = 0; i < s.inner; ++i) {
                            out[(o * out_split.len + offset + k) * s.inner + i] = (*t)[(o * s.len + k) * s.inner + i];
                        }
                    }
                }
                offset += s.len;
            }
            return out;
        }
        case Op::Slice: {
            const Tensor& a = *in[0];
            const std::size_t axis = normalize_axis(attrs.axis, a.rank());
            const AxisSplit s = split_axis(a.shape(), axis);
            Tensor out(infer_shape(op, in, attrs));
            const std::size_t len = attrs.end - attrs.begin;
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t k = 0; k < len; ++k)
                    for (std::size_t i = 0; i < s.inner; ++i)
                        out[(o * len + k) * s.inner + i] = a[(o * s.len + attrs.begin + k) * s.inner + i];
            return out;
        }
        case Op::Transpose: {
            const Tensor& a = *in[0];
            const std::size_t r = a.dim(0), c = a.dim(1);
            Tensor out({c, r});
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
            return out;
        }
        case Op::Reshape:
            return Tensor(attrs.shape, in[0]->values());
        case Op::Sum: {
            double acc = 0.0;
            for (double v : in[0]->data()) acc += v;
            return Tensor::scalar(acc);
        }
        case Op::Mean: {
            double acc = 0.0;
            for (double v : in[0]->data()) acc += v;
            return Tensor::scalar(in[0]->size() ? acc / static_cast<double>(in[0]->size()) : 0.0);
        }
        case Op::SumAxis: {
            const Tensor& a = *in[0];
            const std::size_t axis = normalize_axis(attrs.axis, a.rank());
            const AxisSplit s = split_axis(a.shape(), axis);
            Tensor out(infer_shape(op, in, attrs));
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t k = 0; k < s.len; ++k)
                    for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += a[(o * s.len + k) * s.inner + i];
            return out;
        }
        case Op::Exp: return unary(*in[0], [](double x) { return std::exp(x); });
        case Op::Ln: {
            const double floor = attrs.scalar;
            return unary(*in[0], [floor](double x) { return std::log(std::max(x, floor)); });
        }
        case Op::Sigmoid: return unary(*in[0], sigmoid_scalar);
        case Op::Tanh: return unary(*in[0], [](double x) { return std::tanh(x); });
        case Op::LeakyRelu: {
            const double slope = attrs.scalar;
            return unary(*in[0], [slope](double x) { return x > 0.0 ? x : slope * x; });
        }
        case Op::Softplus: return unary(*in[0], softplus_scalar);
        case Op::Softmax: {
            const Tensor& a = *in[0];
            const std::size_t axis = normalize_axis(attrs.axis, a.rank());
            const AxisSplit s = split_axis(a.shape(), axis);
            Tensor out(a.shape());
            for (std::size_t o = 0; o < s.outer; ++o) {
                for (std::size_t i = 0; i < s.inner; ++i) {
                    auto at = [&](std::size_t k) { return (o * s.len + k) * s.inner + i; };
                    double mx = -std::numeric_limits<double>::infinity();
                    for (std::size_t k = 0; k < s.len; ++k) mx = std::max(mx, a[at(k)]);
                    double total = 0.0;
                    for (std::size_t k = 0; k < s.len; ++k) {
                        out[at(k)] = std::exp(a[at(k)] - mx);
                        total += out[at(k)];
                    }
                    for (std::size_t k = 0; k < s.len; ++k) out[at(k)] /= total;
                }
            }
            return out;
        }
    }
    throw ShapeError("unknown op");
}

}  // namespace detail
}  // namespace simgat::ad
