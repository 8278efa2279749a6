#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numeric>

#include "simgat/classic.hpp"

namespace simgat {

namespace {

const char* const kColumns[] = {"intercept", "ln_origin_mass", "ln_dest_mass", "ln_cost"};

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

void check_params(const GravityParams& p) {
    if (!finite_positive(p.k) || !std::isfinite(p.alpha) || !std::isfinite(p.beta) || !std::isfinite(p.gamma))
        throw ValidationError("gravity parameters must be finite with k > 0");
}

struct Design {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

void check_inputs(const Matrix& flows, std::span<const double> origin, std::span<const double> dest,
                  const Matrix& costs) {
    IssueList issues;
    if (flows.rows != origin.size() || flows.cols != dest.size())
        issues.add("flows shape " + std::to_string(flows.rows) + "x" + std::to_string(flows.cols) +
                   " does not match masses " + std::to_string(origin.size()) + "x" + std::to_string(dest.size()));
    if (costs.rows != flows.rows || costs.cols != flows.cols) issues.add("costs shape does not match flows");
    issues.throw_if_any();
    for (std::size_t i = 0; i < origin.size(); ++i)
        if (!finite_positive(origin[i])) issues.add("origin mass " + std::to_string(i) + " must be positive");
    for (std::size_t j = 0; j < dest.size(); ++j)
        if (!finite_positive(dest[j])) issues.add("destination mass " + std::to_string(j) + " must be positive");
    for (double c : costs.data)
        if (!finite_positive(c)) {
            issues.add("costs must be positive");
            break;
        }
    for (double f : flows.data)
        if (!std::isfinite(f) || f < 0.0) {
            issues.add("flows must be finite and nonnegative");
            break;
        }
    if (flows.data.empty()) issues.add("no observations");
    issues.throw_if_any();
}

Design build_design(const Matrix& flows, std::span<const double> origin, std::span<const double> dest,
                    const Matrix& costs, std::size_t n_cols, bool drop_zeros) {
    std::size_t n = 0;
    for (double f : flows.data) n += !(drop_zeros && f == 0.0);
    Design d{Eigen::MatrixXd(n, n_cols), Eigen::VectorXd(n)};
    std::size_t r = 0;
    for (std::size_t i = 0; i < flows.rows; ++i)
        for (std::size_t j = 0; j < flows.cols; ++j) {
            const double f = flows(i, j);
            if (drop_zeros && f == 0.0) continue;
            const double row[] = {1.0, std::log(origin[i]), std::log(dest[j]), std::log(costs(i, j))};
            for (std::size_t c = 0; c < n_cols; ++c) d.x(r, c) = row[c];
            d.y(r) = f;
            ++r;
        }
    return d;
}

// Names each column that adds no rank, with the earlier columns it depends on.
void require_full_rank(const Eigen::MatrixXd& x) {
    std::vector<std::string> problems;
    std::vector<Eigen::Index> kept;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const Eigen::VectorXd col = x.col(c);
        if (kept.empty()) {
            if (col.norm() == 0.0) problems.push_back(std::string(kColumns[c]) + " is identically zero");
            else kept.push_back(c);
            continue;
        }
        Eigen::MatrixXd prev(x.rows(), static_cast<Eigen::Index>(kept.size()));
        for (std::size_t k = 0; k < kept.size(); ++k) prev.col(static_cast<Eigen::Index>(k)) = x.col(kept[k]);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(prev);
        const Eigen::VectorXd coef = qr.solve(col);
        const double resid = (prev * coef - col).norm();
        if (resid <= 1e-9 * std::max(1.0, col.norm())) {
            std::string with;
            for (std::size_t k = 0; k < kept.size(); ++k) {
                if (std::fabs(coef(static_cast<Eigen::Index>(k))) < 1e-12) continue;
                if (!with.empty()) with += ", ";
                with += kColumns[kept[k]];
            }
            problems.push_back(std::string(kColumns[c]) + " is collinear with " + (with.empty() ? "zero" : with));
        } else {
            kept.push_back(c);
        }
    }
    if (problems.empty()) return;
    std::string msg = "rank-deficient design matrix:";
    for (const auto& p : problems) msg += " " + p + ";";
    msg.pop_back();
    throw ValidationError(msg);
}

double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double ll = 0.0;
    for (Eigen::Index r = 0; r < y.size(); ++r)
        ll += (y(r) > 0.0 ? y(r) * std::log(mu(r)) : 0.0) - mu(r) - std::lgamma(y(r) + 1.0);
    return ll;
}

double poisson_deviance(const Matrix& flows, const std::vector<double>& mu) {
    double dev = 0.0;
    for (std::size_t r = 0; r < mu.size(); ++r) {
        const double y = flows.data[r];
        dev += 2.0 * ((y > 0.0 ? y * std::log(y / mu[r]) : 0.0) - (y - mu[r]));
    }
    return dev;
}

GravityParams to_params(const Eigen::VectorXd& b) {
    GravityParams p{std::exp(b(0)), 0.0, 0.0, 0.0};
    if (b.size() > 1) {
        p.alpha = b(1);
        p.beta = b(2);
        p.gamma = -b(3);
    }
    return p;
}

}  // namespace

double gravity_flow(const GravityParams& p, double origin_mass, double dest_mass, double cost, double cost_floor) {
    check_params(p);
    if (!finite_positive(origin_mass) || !finite_positive(dest_mass))
        throw ValidationError("gravity masses must be positive");
    if (!std::isfinite(cost) || !(cost > 0.0) || cost < cost_floor)
        throw ValidationError("gravity cost " + format_double(cost) + " is below the cost floor");
    return p.k * std::pow(origin_mass, p.alpha) * std::pow(dest_mass, p.beta) / std::pow(cost, p.gamma);
}

const char* method_name(GravityMethod m) { return m == GravityMethod::LogOls ? "log-ols" : "poisson"; }

GravityMethod parse_method(const std::string& name) {
    if (name == "log-ols") return GravityMethod::LogOls;
    if (name == "poisson") return GravityMethod::Poisson;
    throw ValidationError("unknown fit method '" + name + "'");
}

GravityFit fit_gravity(const Matrix& flows, std::span<const double> origin, std::span<const double> dest,
                       const Matrix& costs, const GravityFitOptions& opt) {
    check_inputs(flows, origin, dest, costs);
    const std::size_t n_cols = opt.intercept_only ? 1 : 4;
    GravityFit fit;
    Eigen::VectorXd b;

    if (opt.method == GravityMethod::LogOls) {
        Design d = build_design(flows, origin, dest, costs, n_cols, true);
        fit.n_obs = static_cast<std::size_t>(d.y.size());
        fit.n_dropped_zeros = flows.data.size() - fit.n_obs;
        if (fit.n_obs == 0) throw ValidationError("log-ols needs at least one positive flow");
        require_full_rank(d.x);
        const Eigen::VectorXd ly = d.y.array().log().matrix();
        b = d.x.colPivHouseholderQr().solve(ly);
        fit.iterations = 1;
    } else {
        Design d = build_design(flows, origin, dest, costs, n_cols, false);
        fit.n_obs = static_cast<std::size_t>(d.y.size());
        const double mean_y = d.y.mean();
        if (!(mean_y > 0.0)) throw ValidationError("poisson fit needs at least one positive flow");
        require_full_rank(d.x);
        b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cols));
        b(0) = std::log(mean_y);
        auto mean_at = [&](const Eigen::VectorXd& beta) { return (d.x * beta).array().exp().matrix().eval(); };
        Eigen::VectorXd mu = mean_at(b);
        double ll = poisson_loglik(d.y, mu);
        fit.converged = false;
        for (std::size_t it = 0; it < opt.max_iterations; ++it) {
            fit.iterations = it + 1;
            // Working response and weights of the log-link GLM.
            const Eigen::VectorXd z = (d.x * b).array() + (d.y - mu).array() / mu.array();
            const Eigen::VectorXd sw = mu.array().sqrt();
            const Eigen::MatrixXd xw = sw.asDiagonal() * d.x;
            const Eigen::VectorXd target = (sw.array() * z.array()).matrix();
            const Eigen::VectorXd proposal = xw.colPivHouseholderQr().solve(target);
            Eigen::VectorXd step = proposal - b;
            double new_ll = -std::numeric_limits<double>::infinity();
            Eigen::VectorXd next, next_mu;
            for (int halvings = 0; halvings < 40; ++halvings) {
                next = b + step;
                next_mu = mean_at(next);
                new_ll = next_mu.allFinite() ? poisson_loglik(d.y, next_mu) : -std::numeric_limits<double>::infinity();
                if (new_ll >= ll) break;
                step *= 0.5;
            }
            if (!(new_ll >= ll)) {
                fit.converged = true;  // no ascent direction left at machine precision
                break;
            }
            const double change = std::fabs(new_ll - ll) / std::max(std::fabs(ll), 1e-300);
            b = next;
            mu = next_mu;
            ll = new_ll;
            if (change < opt.tolerance) {
                fit.converged = true;
                break;
            }
        }
    }

    fit.params = to_params(b);
    std::vector<double> mu(flows.data.size());
    for (std::size_t i = 0; i < flows.rows; ++i)
        for (std::size_t j = 0; j < flows.cols; ++j) {
            double eta = b(0);
            if (!opt.intercept_only)
                eta += b(1) * std::log(origin[i]) + b(2) * std::log(dest[j]) + b(3) * std::log(costs(i, j));
            mu[i * flows.cols + j] = std::exp(eta);
        }
    fit.deviance = poisson_deviance(flows, mu);
    const double mean_y = std::accumulate(flows.data.begin(), flows.data.end(), 0.0) /
                          static_cast<double>(flows.data.size());
    const double null_dev = poisson_deviance(flows, std::vector<double>(mu.size(), mean_y));
    fit.pseudo_r2 = null_dev > 0.0 ? 1.0 - fit.deviance / null_dev : 0.0;
    double ll = 0.0;
    for (std::size_t r = 0; r < mu.size(); ++r) {
        const double y = flows.data[r];
        ll += (y > 0.0 ? y * std::log(mu[r]) : 0.0) - mu[r] - std::lgamma(y + 1.0);
    }
    fit.log_likelihood = ll;
    return fit;
}

}  // namespace simgat
