#pragma once

// Gravity and Huff spatial interaction models.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simgat/common.hpp"

namespace simgat {

struct GravityParams {
    double k = 1.0;
    double alpha = 1.0;  // origin mass exponent
    double beta = 1.0;   // destination mass exponent
    double gamma = 1.0;  // distance decay
    bool operator==(const GravityParams&) const = default;
};

struct HuffParams {
    double alpha = 1.0;  // attractiveness exponent
    double beta = 1.0;   // distance decay, >= 0
    bool operator==(const HuffParams&) const = default;
};

/// T = k * Mi^alpha * Mj^beta / c^gamma. Rejects nonpositive masses, costs
/// below `cost_floor`, and invalid parameters.
double gravity_flow(const GravityParams& p, double origin_mass, double dest_mass, double cost,
                    double cost_floor = kCostFloor);

/// Choice probabilities over n destinations; sums to 1.
std::vector<double> huff_probability(const HuffParams& p, std::span<const double> attractiveness,
                                     std::span<const double> costs, double cost_floor = kCostFloor);

enum class GravityMethod { LogOls, Poisson };

const char* method_name(GravityMethod m);
GravityMethod parse_method(const std::string& name);

struct GravityFitOptions {
    GravityMethod method = GravityMethod::Poisson;
    /// Fix alpha = beta = gamma = 0 and fit k only.
    bool intercept_only = false;
    std::size_t max_iterations = 100;
    double tolerance = 1e-10;  // relative log-likelihood change
};

struct GravityFit {
    GravityParams params;
    /// Poisson deviance of the fitted means over every observation.
    double deviance = 0.0;
    /// 1 - deviance / null deviance (null model: constant mean).
    double pseudo_r2 = 0.0;
    double log_likelihood = 0.0;
    std::size_t n_obs = 0;            // observations entering the fit
    std::size_t n_dropped_zeros = 0;  // log-ols only
    std::size_t iterations = 0;
    bool converged = true;
};

/// Calibrates the gravity model on an origins x destinations flow matrix.
/// Throws ValidationError on invalid inputs or a rank-deficient design,
/// naming the collinear columns.
GravityFit fit_gravity(const Matrix& flows, std::span<const double> origin_mass, std::span<const double> dest_mass,
                       const Matrix& costs, const GravityFitOptions& options = {});

struct HuffFit {
    HuffParams params;
    double log_likelihood = 0.0;
    /// 1 - LL / LL(alpha = beta = 0).
    double pseudo_r2 = 0.0;
    std::size_t n_obs = 0;
    std::size_t iterations = 0;
    bool converged = true;
    bool beta_at_bound = false;
};

/// Maximum-likelihood Huff calibration: each origin's flows are treated as
/// multinomial draws over destinations. Newton's method; beta constrained to
/// be nonnegative.
HuffFit fit_huff(const Matrix& flows, std::span<const double> attractiveness, const Matrix& costs,
                 std::size_t max_iterations = 100, double tolerance = 1e-12);

}  // namespace simgat
