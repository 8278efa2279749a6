#include <doctest.h>

#include <cmath>

#include "simgat/autodiff.hpp"
#include "test_support.hpp"

using namespace simgat::ad;
using simgat::Rng;
using testing::max_abs_diff;
using testing::random_tensor;

TEST_CASE("softmax of zeros is uniform") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({0.0, 0.0, 0.0}));
    Var y = softmax(x, 0);
    for (double v : y.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("leaky_relu definition") {
    Tape tape;
    Var y = leaky_relu(tape.leaf(Tensor::vector({-1.0, 2.0})), 0.2);
    CHECK(y.value()[0] == doctest::Approx(-0.2));
    CHECK(y.value()[1] == 2.0);
}

TEST_CASE("matmul matches triple loop") {
    Rng rng(3);
    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {4, 2});
    Tape tape;
    Var c = matmul(tape.leaf(a), tape.leaf(b));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 4; ++k) ref += a.at(i, k) * b.at(k, j);
            CHECK(std::fabs(c.value().at(i, j) - ref) < 1e-14);
        }
}

TEST_CASE("broadcasting aligns trailing dimensions") {
    Tape tape;
    Var col = tape.leaf(Tensor::matrix(2, 1, {1.0, 2.0}));
    Var row = tape.leaf(Tensor::vector({10.0, 20.0, 30.0}));
    Var out = col + row;
    REQUIRE(out.shape() == Shape{2, 3});
    CHECK(out.value().at(1, 2) == 32.0);
    tape.backward(sum(out));
    CHECK(tape.grad(col)[0] == 3.0);
    CHECK(tape.grad(row)[2] == 2.0);

    Var bad = tape.leaf(Tensor::vector({1.0, 2.0}));
    CHECK_THROWS_AS(row + bad, ShapeError);
    CHECK_THROWS_AS(matmul(row, bad), ShapeError);
}

TEST_CASE("backward of sum is all ones") {
    Tape tape;
    Var x = tape.leaf(Tensor({2, 3}, 0.5));
    tape.backward(sum(x));
    for (double g : tape.grad(x).data()) CHECK(g == 1.0);
}

TEST_CASE("sum of softmax has zero gradient") {
    Rng rng(5);
    Tape tape;
    Var x = tape.leaf(random_tensor(rng, {4, 3}, -3.0, 3.0));
    tape.backward(sum(softmax(x, 1)));
    for (double g : tape.grad(x).data()) CHECK(std::fabs(g) < 1e-15);
}

TEST_CASE("backward rejects non-scalar outputs") {
    Tape tape;
    Var x = tape.leaf(Tensor({2}, 1.0));
    CHECK_THROWS_AS(tape.backward(exp(x)), ShapeError);
}

TEST_CASE("non-finite outputs are reported with the op name") {
    Tape tape;
    tape.set_check_finite(true);
    Var x = tape.leaf(Tensor::vector({-1.0}));
    try {
        ln(x);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("ln") != std::string::npos);
    }
}

TEST_CASE("softmax rows sum to one and ignore shifts") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor(rng, {5, 7}, -30.0, 30.0);
        Tensor shifted = x;
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 7; ++c) shifted.at(r, c) += 100.0 * static_cast<double>(r) - 17.0;
        Tape tape;
        Var a = softmax(tape.leaf(x), 1);
        Var b = softmax(tape.leaf(shifted), 1);
        for (std::size_t r = 0; r < 5; ++r) {
            double total = 0.0;
            for (std::size_t c = 0; c < 7; ++c) total += a.value().at(r, c);
            CHECK(std::fabs(total - 1.0) < 1e-12);
        }
        CHECK(max_abs_diff(a.value(), b.value()) < 1e-12);
    }
}

TEST_CASE("exp and ln round trip") {
    Tape tape;
    std::vector<double> xs;
    for (double v = -20.0; v <= 20.0; v += 0.25) xs.push_back(v);
    Tensor x = Tensor::vector(xs);
    Var y = ln(exp(tape.leaf(x)));
    CHECK(max_abs_diff(x, y.value()) < 1e-12);
}

TEST_CASE("slice, concat, transpose, reshape and sum(axis) adjoints") {
    Rng rng(2);
    const std::vector<NamedTensor> params = {{"a", random_tensor(rng, {3, 4})}, {"b", random_tensor(rng, {3, 2})}};
    auto closure = [](Tape&, std::span<const Var> p) {
        Var c = concat({p[0], p[1]}, 1);                   // 3x6
        Var s = slice(c, 1, 2, 5);                          // 3x3
        Var t = transpose(reshape(s, {9, 1}));              // 1x9
        Var r = sum(tanh(t) * t, 1);                        // 1x1
        Var q = sum(sigmoid(sum(c, 0)));                    // scalar
        return sum(r) + q * scale(mean(softplus(p[1])), 3.0);
    };
    auto report = grad_check(closure, params, 1e-6, 1e-7);
    CHECK(report.pass);
}

TEST_CASE("grad_check on a quadratic is exact to rounding") {
    Rng rng(1);
    const std::vector<NamedTensor> params = {{"x", random_tensor(rng, {6})}};
    auto closure = [](Tape&, std::span<const Var> p) { return scale(sum(p[0] * p[0]), 0.5); };
    auto report = grad_check(closure, params, 1e-5, 1e-9);
    CHECK(report.pass);
    CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("grad_check on logistic regression") {
    Rng rng(9);
    Tensor features = random_tensor(rng, {20, 3}, -2.0, 2.0);
    Tensor labels({20, 1});
    for (std::size_t i = 0; i < 20; ++i) labels[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const std::vector<NamedTensor> params = {{"w", random_tensor(rng, {3, 1})}, {"b", random_tensor(rng, {1})}};
    auto closure = [&](Tape& tape, std::span<const Var> p) {
        Var xs = tape.constant(features);
        Var ys = tape.constant(labels);
        Var z = matmul(xs, p[0]) + p[1];
        // Binary cross-entropy written with softplus: softplus(z) - y z.
        return mean(softplus(z) - ys * z);
    };
    auto report = grad_check(closure, params, 1e-5, 1e-6);
    CHECK(report.pass);
}

namespace {

// Random composite touching every differentiable op.
Var composite(Tape& tape, std::span<const Var> p, int variant) {
    Var a = p[0];  // 3x4
    Var b = p[1];  // 4x2
    Var c = p[2];  // 2
    Var m = matmul(a, b) + c;                        // 3x2, broadcast bias
    Var d = m / (softplus(m) + tape.constant(Tensor::scalar(1.0)));
    Var e = leaky_relu(d, 0.2) * sigmoid(m) - tanh(d);
    Var s = softmax(e, variant % 2);
    Var l = ln(exp(s) + s * s, 1e-12);
    Var j = concat({l, slice(m, 1, 0, 1)}, 1);       // 3x3
    return mean(j * transpose(j)) + sum(sum(e, 0));
}

}  // namespace

TEST_CASE("chain rule matches finite differences on random composites") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const std::vector<NamedTensor> params = {
            {"a", random_tensor(rng, {3, 4})}, {"b", random_tensor(rng, {4, 2})}, {"c", random_tensor(rng, {2})}};
        const int variant = static_cast<int>(seed);
        auto closure = [variant](Tape& tape, std::span<const Var> p) { return composite(tape, p, variant); };
        auto report = grad_check(closure, params, 1e-5, 1e-6);
        CHECK_MESSAGE(report.pass, "seed " << seed << " max rel err " << report.max_rel_error);
    }
}

TEST_CASE("two-point propagation sums exactly to the output delta") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(100 + seed);
        Tape tape;
        std::vector<Var> leaves = {tape.leaf(random_tensor(rng, {3, 4})), tape.leaf(random_tensor(rng, {4, 2})),
                                   tape.leaf(random_tensor(rng, {2}))};
        Var out = composite(tape, leaves, static_cast<int>(seed));
        std::map<std::size_t, Tensor> ref;
        for (const Var& v : leaves) ref[v.id()] = random_tensor(rng, v.shape());
        auto ref_values = tape.replay(ref);
        auto mult = tape.propagate(out.id(), Tensor::scalar(1.0), tape.values(), ref_values);
        double total = 0.0;
        for (const Var& v : leaves)
            for (std::size_t k = 0; k < v.value().size(); ++k)
                total += mult[v.id()][k] * (v.value()[k] - ref_values[v.id()][k]);
        const double delta = out.value().item() - ref_values[out.id()].item();
        CHECK(std::fabs(total - delta) < 1e-10);
    }
}

TEST_CASE("replay reproduces the recorded values bit for bit") {
    Rng rng(4);
    Tape tape;
    std::vector<Var> leaves = {tape.leaf(random_tensor(rng, {3, 4})), tape.leaf(random_tensor(rng, {4, 2})),
                               tape.leaf(random_tensor(rng, {2}))};
    Var out = composite(tape, leaves, 1);
    auto values = tape.replay({});
    CHECK(values[out.id()] == out.value());
}
