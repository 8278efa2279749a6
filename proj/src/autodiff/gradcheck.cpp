#include <algorithm>
#include <cmath>

#include "simgat/autodiff.hpp"

namespace simgat::ad {

namespace {

double evaluate(const LossClosure& closure, const std::vector<NamedTensor>& params) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p.value, p.name));
    return closure(tape, leaves).value().item();
}

}  // namespace

GradCheckReport grad_check(const LossClosure& closure, const std::vector<NamedTensor>& params, double h,
                           double tolerance) {
    GradCheckReport report;
    report.step = h;
    report.tolerance = tolerance;

    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> leaves;
        for (const auto& p : params) leaves.push_back(tape.leaf(p.value, p.name));
        Var loss = closure(tape, leaves);
        tape.backward(loss);
        for (const Var& v : leaves) analytic.push_back(tape.grad(v));
    }

    std::vector<NamedTensor> work = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckEntry entry;
        entry.name = params[p].name;
        entry.count = params[p].value.size();
        for (std::size_t k = 0; k < params[p].value.size(); ++k) {
            const double orig = params[p].value[k];
            work[p].value[k] = orig + h;
            const double up = evaluate(closure, work);
            work[p].value[k] = orig - h;
            const double down = evaluate(closure, work);
            work[p].value[k] = orig;

            const double fd = (up - down) / (2.0 * h);
            const double ad = analytic[p][k];
            const double rel = std::fabs(ad - fd) / std::max(1e-8, std::fabs(ad) + std::fabs(fd));
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
            entry.max_abs_grad = std::max(entry.max_abs_grad, std::fabs(ad));
        }
        entry.pass = entry.max_rel_error < tolerance;
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace simgat::ad
