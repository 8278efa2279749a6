#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels.hpp"

namespace simgat::ad {

using detail::AxisSplit;
using detail::broadcast_map;
using detail::normalize_axis;
using detail::split_axis;

const Tensor& Var::value() const {
    if (!tape_) throw std::logic_error("value() on an unbound Var");
    return tape_->value(id_);
}

Tape::Tape() {
#ifdef NDEBUG
    check_finite_ = false;
#else
    check_finite_ = true;
#endif
}

Var Tape::leaf(Tensor value, std::string label) {
    Node node;
    node.label = std::move(label);
    node.live = true;
    nodes_.push_back(std::move(node));
    grads_.emplace_back();
    values_.push_back(std::move(value));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node node;
    node.constant = true;
    nodes_.push_back(std::move(node));
    grads_.emplace_back();
    values_.push_back(std::move(value));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Op op, std::vector<std::size_t> inputs, OpAttrs attrs) {
    std::vector<const Tensor*> in;
    in.reserve(inputs.size());
    bool live = false;
    for (std::size_t id : inputs) {
        if (id >= nodes_.size()) throw std::out_of_range("record: input node does not exist");
        in.push_back(&values_[id]);
        live = live || nodes_[id].live;
    }
    detail::infer_shape(op, in, attrs);
    Tensor value = detail::compute(op, in, attrs);
    if (check_finite_) {
        for (double v : value.data()) {
            if (!std::isfinite(v)) {
                throw NumericError(std::string("non-finite output from ") + op_name(op) + " (node " +
                                   std::to_string(nodes_.size()) + ")");
            }
        }
    }
    Node node;
    node.op = op;
    node.inputs = std::move(inputs);
    node.attrs = std::move(attrs);
    node.live = live;
    nodes_.push_back(std::move(node));
    grads_.emplace_back();
    values_.push_back(std::move(value));
    return Var(this, nodes_.size() - 1);
}

void Tape::set_label(Var v, std::string label) { nodes_.at(v.id()).label = std::move(label); }

std::vector<std::size_t> Tape::find(const std::string& label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].label == label) out.push_back(i);
    return out;
}

void Tape::backward(Var output) {
    if (output.value().size() != 1) {
        throw ShapeError("backward needs a scalar output, got shape " + shape_str(output.shape()));
    }
    backward(output, Tensor(output.shape(), 1.0));
}

void Tape::backward(Var output, const Tensor& seed) {
    auto mult = propagate(output.id(), seed, values_, values_);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].op != Op::Leaf || nodes_[i].constant || mult[i].size() == 0) continue;
        if (grads_[i].size() == 0) {
            grads_[i] = std::move(mult[i]);
        } else {
            for (std::size_t k = 0; k < grads_[i].size(); ++k) grads_[i][k] += mult[i][k];
        }
    }
}

const Tensor& Tape::grad(Var v) const { return grad(v.id()); }

const Tensor& Tape::grad(std::size_t id) const {
    static thread_local Tensor zeros;
    if (grads_.at(id).size() == 0) {
        zeros = Tensor(values_.at(id).shape(), 0.0);
        return zeros;
    }
    return grads_[id];
}

void Tape::zero_grad() {
    for (auto& g : grads_) g = Tensor();
}

std::vector<Tensor> Tape::replay(const std::map<std::size_t, Tensor>& overrides) const {
    std::vector<Tensor> out(nodes_.size());
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (auto it = overrides.find(id); it != overrides.end()) {
            if (it->second.shape() != values_[id].shape()) {
                throw ShapeError("replay override for node " + std::to_string(id) + " has shape " +
                                 shape_str(it->second.shape()) + ", expected " + shape_str(values_[id].shape()));
            }
            out[id] = it->second;
            continue;
        }
        const Node& node = nodes_[id];
        if (node.op == Op::Leaf) {
            out[id] = values_[id];
            continue;
        }
        std::vector<const Tensor*> in;
        in.reserve(node.inputs.size());
        for (std::size_t i : node.inputs) in.push_back(&out[i]);
        out[id] = detail::compute(node.op, in, node.attrs);
    }
    return out;
}

namespace {

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Local slope of an elementwise op between input points x and r with outputs
// y and yr: the secant (y - yr) / (x - r), or the derivative at the midpoint
// when the two inputs nearly coincide.
double elementwise_slope(Op op, const OpAttrs& attrs, double x, double r, double y, double yr) {
    const double dx = x - r;
    const double mid = 0.5 * (x + r);
    const bool close = std::fabs(dx) < Tape::kRescaleEpsilon;
    switch (op) {
        case Op::Exp:
            if (close) return std::exp(mid);
            return yr * std::expm1(dx) / dx;
        case Op::Ln: {
            const double floor = attrs.scalar;
            const double xc = std::max(x, floor), rc = std::max(r, floor);
            if (close) return mid > floor ? 1.0 / mid : 0.0;
            if (xc == rc) return 0.0;
            return std::log1p((xc - rc) / rc) / dx;
        }
        case Op::Sigmoid: {
            if (close) {
                const double s = sigmoid_scalar(mid);
                return s * (1.0 - s);
            }
            return (y - yr) / dx;
        }
        case Op::Tanh: {
            if (close) {
                const double t = std::tanh(mid);
                return 1.0 - t * t;
            }
            return (y - yr) / dx;
        }
        case Op::LeakyRelu:
            if (close) return mid > 0.0 ? 1.0 : attrs.scalar;
            return (y - yr) / dx;
        case Op::Softplus:
            if (close) return sigmoid_scalar(mid);
            return (y - yr) / dx;
        default:
            break;
    }
    throw std::logic_error("elementwise_slope on a non-elementwise op");
}

Tensor midpoint(const Tensor& a, const Tensor& b, bool same) {
    if (same) return a;
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (a[i] + b[i]);
    return out;
}

}  // namespace

std::vector<Tensor> Tape::propagate(std::size_t output, const Tensor& seed, std::span<const Tensor> values,
                                    std::span<const Tensor> reference,
                                    const std::set<std::size_t>& frozen) const {
    if (output >= nodes_.size()) throw std::out_of_range("propagate: output node does not exist");
    if (values.size() != nodes_.size() || reference.size() != nodes_.size()) {
        throw std::invalid_argument("propagate: value arrays do not match the tape");
    }
    if (seed.shape() != values[output].shape()) {
        throw ShapeError("seed shape " + shape_str(seed.shape()) + " does not match output " +
                         shape_str(values[output].shape()));
    }
    const bool same = values.data() == reference.data();

    std::vector<Tensor> mult(nodes_.size());
    mult[output] = seed;

    auto accum = [&](std::size_t id) -> Tensor* {
        if (!nodes_[id].live) return nullptr;
        if (mult[id].size() == 0 && values[id].size() != 0) mult[id] = Tensor(values[id].shape(), 0.0);
        if (mult[id].shape() != values[id].shape()) mult[id] = Tensor(values[id].shape(), 0.0);
        return &mult[id];
    };

    for (std::size_t id = output + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (node.op == Op::Leaf || !node.live || mult[id].size() == 0 || frozen.count(id)) continue;
        const Tensor& g = mult[id];
        const auto& ins = node.inputs;

        switch (node.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                const Tensor& a = values[ins[0]];
                const Tensor& b = values[ins[1]];
                const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
                if (Tensor* ga = accum(ins[0])) {
                    const Tensor bm = midpoint(b, reference[ins[1]], same);
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * bm[p * m + j];
                            (*ga)[i * k + p] += acc;
                        }
                }
                if (Tensor* gb = accum(ins[1])) {
                    const Tensor am = midpoint(a, reference[ins[0]], same);
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                            const double av = am[i * k + p];
                            for (std::size_t j = 0; j < m; ++j) (*gb)[p * m + j] += av * g[i * m + j];
                        }
                }
                break;
            }
            case Op::Add:
            case Op::Sub: {
                const double sign_b = node.op == Op::Add ? 1.0 : -1.0;
                const Shape& out_shape = values[id].shape();
                if (Tensor* ga = accum(ins[0])) {
                    const auto ma = broadcast_map(out_shape, values[ins[0]].shape());
                    for (std::size_t k = 0; k < g.size(); ++k) (*ga)[ma[k]] += g[k];
                }
                if (Tensor* gb = accum(ins[1])) {
                    const auto mb = broadcast_map(out_shape, values[ins[1]].shape());
                    for (std::size_t k = 0; k < g.size(); ++k) (*gb)[mb[k]] += sign_b * g[k];
                }
                break;
            }
            case Op::Mul: {
                const Shape& out_shape = values[id].shape();
                const auto ma = broadcast_map(out_shape, values[ins[0]].shape());
                const auto mb = broadcast_map(out_shape, values[ins[1]].shape());
                if (Tensor* ga = accum(ins[0])) {
                    const Tensor bm = midpoint(values[ins[1]], reference[ins[1]], same);
                    for (std::size_t k = 0; k < g.size(); ++k) (*ga)[ma[k]] += g[k] * bm[mb[k]];
                }
                if (Tensor* gb = accum(ins[1])) {
                    const Tensor am = midpoint(values[ins[0]], reference[ins[0]], same);
                    for (std::size_t k = 0; k < g.size(); ++k) (*gb)[mb[k]] += g[k] * am[ma[k]];
                }
                break;
            }
            case Op::Div: {
                // a / b = a * (1/b); 1/b has secant slope -1 / (b * b_ref).
                const Shape& out_shape = values[id].shape();
                const auto ma = broadcast_map(out_shape, values[ins[0]].shape());
                const auto mb = broadcast_map(out_shape, values[ins[1]].shape());
                const Tensor& b = values[ins[1]];
                const Tensor& br = reference[ins[1]];
                if (Tensor* ga = accum(ins[0])) {
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        const double inv = same ? 1.0 / b[mb[k]] : 0.5 * (1.0 / b[mb[k]] + 1.0 / br[mb[k]]);
                        (*ga)[ma[k]] += g[k] * inv;
                    }
                }
                if (Tensor* gb = accum(ins[1])) {
                    const Tensor am = midpoint(values[ins[0]], reference[ins[0]], same);
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        (*gb)[mb[k]] -= g[k] * am[ma[k]] / (b[mb[k]] * br[mb[k]]);
                    }
                }
                break;
            }
            case Op::Neg:
            case Op::Scale: {
                const double k = node.op == Op::Neg ? -1.0 : node.attrs.scalar;
                if (Tensor* ga = accum(ins[0]))
                    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += k * g[i];
                break;
            }
            case Op::Concat: {
                const std::size_t axis = normalize_axis(node.attrs.axis, values[id].rank());
                const AxisSplit out_split = split_axis(values[id].shape(), axis);
                std::size_t offset = 0;
                for (std::size_t part : ins) {
                    const AxisSplit s = split_axis(values[part].shape(), axis);
                    if (Tensor* gp = accum(part)) {
                        for (std::size_t o = 0; o < s.outer; ++o)
                            for (std::size_t k = 0; k < s.len; ++k)
                                for (std::size_t i = 0; i < s.inner; ++i)
                                    (*gp)[(o * s.len + k) * s.inner + i] +=
                                        g[(o * out_split.len + offset + k) * s.inner + i];
                    }
                    offset += s.len;
                }
                break;
            }
            case Op::Slice: {
                if (Tensor* ga = accum(ins[0])) {
                    const std::size_t axis = normalize_axis(node.attrs.axis, values[ins[0]].rank());
                    const AxisSplit s = split_axis(values[ins[0]].shape(), axis);
                    const std::size_t len = node.attrs.end - node.attrs.begin;
                    for (std::size_t o = 0; o < s.outer; ++o)
                        for (std::size_t k = 0; k < len; ++k)
                            for (std::size_t i = 0; i < s.inner; ++i)
                                (*ga)[(o * s.len + node.attrs.begin + k) * s.inner + i] += g[(o * len + k) * s.inner + i];
                }
                break;
            }
            case Op::Transpose: {
                if (Tensor* ga = accum(ins[0])) {
                    const std::size_t r = values[ins[0]].dim(0), c = values[ins[0]].dim(1);
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[j * r + i];
                }
                break;
            }
            case Op::Reshape: {
                if (Tensor* ga = accum(ins[0]))
                    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                break;
            }
            case Op::Sum:
            case Op::Mean: {
                if (Tensor* ga = accum(ins[0])) {
                    const double n = static_cast<double>(ga->size());
                    const double v = node.op == Op::Sum ? g[0] : g[0] / n;
                    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += v;
                }
                break;
            }
            case Op::SumAxis: {
                if (Tensor* ga = accum(ins[0])) {
                    const std::size_t axis = normalize_axis(node.attrs.axis, values[ins[0]].rank());
                    const AxisSplit s = split_axis(values[ins[0]].shape(), axis);
                    for (std::size_t o = 0; o < s.outer; ++o)
                        for (std::size_t k = 0; k < s.len; ++k)
                            for (std::size_t i = 0; i < s.inner; ++i)
                                (*ga)[(o * s.len + k) * s.inner + i] += g[o * s.inner + i];
                }
                break;
            }
            case Op::Exp:
            case Op::Ln:
            case Op::Sigmoid:
            case Op::Tanh:
            case Op::LeakyRelu:
            case Op::Softplus: {
                if (Tensor* ga = accum(ins[0])) {
                    const Tensor& x = values[ins[0]];
                    const Tensor& r = reference[ins[0]];
                    const Tensor& y = values[id];
                    const Tensor& yr = reference[id];
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        (*ga)[i] += g[i] * elementwise_slope(node.op, node.attrs, x[i], r[i], y[i], yr[i]);
                    }
                }
                break;
            }
            case Op::Softmax: {
                // Decomposed as z = exp(x - c), s = sum(z), y = z / s with a
                // lane shift c shared by both evaluations; the shift cancels.
                Tensor* ga = accum(ins[0]);
                if (!ga) break;
                const Tensor& x = values[ins[0]];
                const Tensor& r = reference[ins[0]];
                const std::size_t axis = normalize_axis(node.attrs.axis, x.rank());
                const AxisSplit s = split_axis(x.shape(), axis);
                std::vector<double> z(s.len), zr(s.len);
                for (std::size_t o = 0; o < s.outer; ++o) {
                    for (std::size_t i = 0; i < s.inner; ++i) {
                        auto at = [&](std::size_t k) { return (o * s.len + k) * s.inner + i; };
                        double c = -std::numeric_limits<double>::infinity();
                        for (std::size_t k = 0; k < s.len; ++k) c = std::max({c, x[at(k)], r[at(k)]});
                        double sx = 0.0, sr = 0.0;
                        for (std::size_t k = 0; k < s.len; ++k) {
                            z[k] = std::exp(x[at(k)] - c);
                            zr[k] = std::exp(r[at(k)] - c);
                            sx += z[k];
                            sr += zr[k];
                        }
                        const double inv_mid = same ? 1.0 / sx : 0.5 * (1.0 / sx + 1.0 / sr);
                        double weighted = 0.0;
                        for (std::size_t k = 0; k < s.len; ++k) weighted += g[at(k)] * 0.5 * (z[k] + zr[k]);
                        const double shared = -weighted / (sx * sr);
                        for (std::size_t k = 0; k < s.len; ++k) {
                            const double mz = g[at(k)] * inv_mid + shared;
                            const double dx = x[at(k)] - r[at(k)];
                            const double slope = std::fabs(dx) < kRescaleEpsilon
                                                     ? std::exp(0.5 * (x[at(k)] + r[at(k)]) - c)
                                                     : zr[k] * std::expm1(dx) / dx;
                            (*ga)[at(k)] += mz * slope;
                        }
                    }
                }
                break;
            }
        }
    }
    return mult;
}

}  // namespace simgat::ad
