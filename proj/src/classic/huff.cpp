#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "simgat/classic.hpp"

namespace simgat {

namespace {

// Log-space softmax over scores.
std::vector<double> softmax(const std::vector<double>& s) {
    const double top = *std::max_element(s.begin(), s.end());
    std::vector<double> p(s.size());
    double total = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) total += p[j] = std::exp(s[j] - top);
    for (double& v : p) v /= total;
    return p;
}

struct Objective {
    double ll = 0.0;
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

// Multinomial log-likelihood with features (ln A_j, -ln c_ij).
class HuffLikelihood {
public:
    HuffLikelihood(const Matrix& flows, std::span<const double> attractiveness, const Matrix& costs)
        : flows_(flows), m_(flows.rows), n_(flows.cols), x_(flows.rows * flows.cols) {
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                x_[i * n_ + j] = {std::log(attractiveness[j]), -std::log(costs(i, j))};
    }

    Objective at(const Eigen::Vector2d& theta) const {
        Objective o;
        std::vector<double> s(n_);
        for (std::size_t i = 0; i < m_; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                s[j] = theta.dot(x_[i * n_ + j]);
                total += flows_(i, j);
            }
            if (total == 0.0) continue;
            const auto p = softmax(s);
            Eigen::Vector2d mean = Eigen::Vector2d::Zero();
            for (std::size_t j = 0; j < n_; ++j) mean += p[j] * x_[i * n_ + j];
            for (std::size_t j = 0; j < n_; ++j) {
                const auto& x = x_[i * n_ + j];
                if (flows_(i, j) > 0.0) o.ll += flows_(i, j) * std::log(p[j]);
                o.grad += flows_(i, j) * (x - mean);
                const Eigen::Vector2d dx = x - mean;
                o.hess -= total * p[j] * dx * dx.transpose();
            }
        }
        return o;
    }

private:
    const Matrix& flows_;
    std::size_t m_, n_;
    std::vector<Eigen::Vector2d> x_;
};

}  // namespace

std::vector<double> huff_probability(const HuffParams& p, std::span<const double> attractiveness,
                                     std::span<const double> costs, double cost_floor) {
    if (attractiveness.empty() || attractiveness.size() != costs.size())
        throw ValidationError("huff needs matching, nonempty attractiveness and cost vectors");
    if (!std::isfinite(p.alpha) || !std::isfinite(p.beta) || p.beta < 0.0)
        throw ValidationError("huff parameters must be finite with beta >= 0");
    std::vector<double> s(attractiveness.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (!std::isfinite(attractiveness[j]) || !(attractiveness[j] > 0.0))
            throw ValidationError("huff attractiveness must be positive");
        if (!std::isfinite(costs[j]) || !(costs[j] > 0.0) || costs[j] < cost_floor)
            throw ValidationError("huff cost " + format_double(costs[j]) + " is below the cost floor");
    }
    // Ratios to the largest attractiveness: scaling every A_j by a power of
    // two leaves them, and so the probabilities, bit-identical.
    const double top = *std::max_element(attractiveness.begin(), attractiveness.end());
    for (std::size_t j = 0; j < s.size(); ++j)
        s[j] = p.alpha * std::log(attractiveness[j] / top) - p.beta * std::log(costs[j]);
    return softmax(s);
}

HuffFit fit_huff(const Matrix& flows, std::span<const double> attractiveness, const Matrix& costs,
                 std::size_t max_iterations, double tolerance) {
    IssueList issues;
    if (flows.cols != attractiveness.size() || costs.rows != flows.rows || costs.cols != flows.cols)
        issues.add("huff fit: flows, attractiveness and costs shapes disagree");
    issues.throw_if_any();
    for (double a : attractiveness)
        if (!std::isfinite(a) || !(a > 0.0)) issues.add("huff fit: attractiveness must be positive");
    for (double c : costs.data)
        if (!std::isfinite(c) || !(c > 0.0)) issues.add("huff fit: costs must be positive");
    double total = 0.0;
    for (double f : flows.data) {
        if (!std::isfinite(f) || f < 0.0) issues.add("huff fit: flows must be nonnegative");
        total += f;
    }
    if (!(total > 0.0)) issues.add("huff fit: no positive flows");
    issues.throw_if_any();

    const HuffLikelihood lik(flows, attractiveness, costs);
    HuffFit fit;
    fit.n_obs = flows.data.size();

    // Newton ascent on the concave log-likelihood; alpha only when beta is
    // pinned.
    auto newton = [&](Eigen::Vector2d theta, bool beta_free) {
        Objective o = lik.at(theta);
        fit.converged = false;
        for (std::size_t it = 0; it < max_iterations; ++it) {
            ++fit.iterations;
            Eigen::Vector2d step = Eigen::Vector2d::Zero();
            if (beta_free) {
                Eigen::FullPivLU<Eigen::Matrix2d> lu(-o.hess);
                if (lu.rank() < 2)
                    throw ValidationError("huff fit: rank-deficient design (ln_attractiveness, ln_cost)");
                step = lu.solve(o.grad);
            } else {
                if (!(-o.hess(0, 0) > 0.0)) throw ValidationError("huff fit: ln_attractiveness is constant");
                step(0) = o.grad(0) / -o.hess(0, 0);
            }
            Objective next;
            for (int h = 0; h < 60; ++h) {
                next = lik.at(theta + step);
                if (next.ll >= o.ll) break;
                step *= 0.5;
            }
            if (!(next.ll >= o.ll)) {
                fit.converged = true;
                break;
            }
            const double change = std::fabs(next.ll - o.ll) / std::max(std::fabs(o.ll), 1e-300);
            theta += step;
            o = next;
            if (change < tolerance && step.norm() < 1e-10 * (1.0 + theta.norm())) {
                fit.converged = true;
                break;
            }
        }
        return std::pair{theta, o};
    };

    auto [theta, o] = newton(Eigen::Vector2d(0.0, 0.0), true);
    if (theta(1) < 0.0) {
        // Concave objective: the constrained optimum lies on beta = 0.
        std::tie(theta, o) = newton(Eigen::Vector2d(theta(0), 0.0), false);
        fit.beta_at_bound = true;
    }
    fit.params = {theta(0), theta(1)};
    fit.log_likelihood = o.ll;
    const double ll0 = lik.at(Eigen::Vector2d::Zero()).ll;
    fit.pseudo_r2 = ll0 != 0.0 ? 1.0 - o.ll / ll0 : 0.0;
    return fit;
}

}  // namespace simgat
