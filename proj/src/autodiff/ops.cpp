#include "kernels.hpp"

namespace simgat::ad {

namespace {

Tape& same_tape(Var a, Var b) {
    if (!a.valid() || !b.valid()) throw std::logic_error("op on an unbound Var");
    if (a.tape() != b.tape()) throw std::logic_error("operands live on different tapes");
    return *a.tape();
}

Tape& tape_of(Var a) {
    if (!a.valid()) throw std::logic_error("op on an unbound Var");
    return *a.tape();
}

Var binary(Op op, Var a, Var b) { return same_tape(a, b).record(op, {a.id(), b.id()}); }

Var unary(Op op, Var a, OpAttrs attrs = {}) { return tape_of(a).record(op, {a.id()}, std::move(attrs)); }

}  // namespace

Var matmul(Var a, Var b) { return binary(Op::MatMul, a, b); }
Var add(Var a, Var b) { return binary(Op::Add, a, b); }
Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
Var div(Var a, Var b) { return binary(Op::Div, a, b); }
Var neg(Var a) { return unary(Op::Neg, a); }

Var scale(Var a, double k) {
    OpAttrs attrs;
    attrs.scalar = k;
    return unary(Op::Scale, a, attrs);
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        same_tape(parts.front(), p);
        ids.push_back(p.id());
    }
    OpAttrs attrs;
    attrs.axis = axis;
    return parts.front().tape()->record(Op::Concat, std::move(ids), attrs);
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
    OpAttrs attrs;
    attrs.axis = axis;
    attrs.begin = begin;
    attrs.end = end;
    return unary(Op::Slice, a, attrs);
}

Var transpose(Var a) { return unary(Op::Transpose, a); }

Var reshape(Var a, Shape shape) {
    OpAttrs attrs;
    attrs.shape = std::move(shape);
    return unary(Op::Reshape, a, attrs);
}

Var sum(Var a) { return unary(Op::Sum, a); }

Var sum(Var a, int axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return unary(Op::SumAxis, a, attrs);
}

Var mean(Var a) { return unary(Op::Mean, a); }
Var exp(Var a) { return unary(Op::Exp, a); }

Var ln(Var a, double floor) {
    OpAttrs attrs;
    attrs.scalar = floor;
    return unary(Op::Ln, a, attrs);
}

Var sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Var tanh(Var a) { return unary(Op::Tanh, a); }

Var leaky_relu(Var a, double slope) {
    OpAttrs attrs;
    attrs.scalar = slope;
    return unary(Op::LeakyRelu, a, attrs);
}

Var softplus(Var a) { return unary(Op::Softplus, a); }

Var softmax(Var a, int axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return unary(Op::Softmax, a, attrs);
}

}  // namespace simgat::ad
