#pragma once

#include <vector>

#include "simgat/autodiff.hpp"

namespace simgat::ad::detail {

/// Index of each output element in an operand broadcast to `out`.
std::vector<std::size_t> broadcast_map(const Shape& out, const Shape& in);

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

std::size_t normalize_axis(int axis, std::size_t rank);
AxisSplit split_axis(const Shape& shape, std::size_t axis);

/// Forward evaluation shared by recording and replay.
Tensor compute(Op op, const std::vector<const Tensor*>& in, const OpAttrs& attrs);

/// Validates operand shapes and returns the output shape.
Shape infer_shape(Op op, const std::vector<const Tensor*>& in, const OpAttrs& attrs);

}  // namespace simgat::ad::detail
