#include <Eigen/Dense>

#include "simgat/domain.hpp"

namespace simgat {

Matrix PcaBasis::project(const Matrix& counts) const {
    if (counts.cols != mean.size()) {
        throw ValidationError("pca: basis expects " + std::to_string(mean.size()) + " columns, got " +
                              std::to_string(counts.cols));
    }
    Matrix out(counts.rows, components.cols);
    for (std::size_t r = 0; r < counts.rows; ++r)
        for (std::size_t p = 0; p < components.cols; ++p) {
            double acc = 0.0;
            for (std::size_t c = 0; c < counts.cols; ++c) acc += (counts(r, c) - mean[c]) * components(c, p);
            out(r, p) = acc;
        }
    return out;
}

PcaResult pca_reduce(const Matrix& counts, double target_variance) {
    if (counts.cols < 1) throw ValidationError("pca: need at least one column");
    if (counts.rows < 2) throw ValidationError("pca: need at least two rows to estimate a covariance");
    if (!(target_variance > 0.0 && target_variance <= 1.0)) {
        throw ValidationError("pca: target variance must lie in (0, 1]");
    }
    const auto n = static_cast<Eigen::Index>(counts.rows);
    const auto d = static_cast<Eigen::Index>(counts.cols);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < d; ++c) x(r, c) = counts(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw ValidationError("pca: eigen-decomposition failed");
    // Eigen returns ascending eigenvalues; reverse to leading-first.
    const Eigen::VectorXd evals = solver.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

    PcaResult result;
    PcaBasis& basis = result.basis;
    basis.mean.assign(mu.data(), mu.data() + d);
    basis.eigenvalues.assign(evals.data(), evals.data() + d);
    const double total = evals.sum();
    basis.explained_ratio.resize(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i)
        basis.explained_ratio[static_cast<std::size_t>(i)] = total > 0.0 ? evals(i) / total : (i == 0 ? 1.0 : 0.0);

    std::size_t p = 0;
    double cumulative = 0.0;
    // Tolerance absorbs rounding when the target is exactly reachable.
    while (p < static_cast<std::size_t>(d) && cumulative < target_variance - 1e-12) {
        cumulative += basis.explained_ratio[p];
        ++p;
    }
    p = std::max<std::size_t>(p, 1);

    basis.components = Matrix(static_cast<std::size_t>(d), p);
    for (std::size_t c = 0; c < static_cast<std::size_t>(d); ++c)
        for (std::size_t k = 0; k < p; ++k)
            basis.components(c, k) = evecs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
    // Sign convention: the largest-magnitude loading of each component is positive.
    for (std::size_t k = 0; k < p; ++k) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < static_cast<std::size_t>(d); ++c)
            if (std::abs(basis.components(c, k)) > std::abs(basis.components(arg, k))) arg = c;
        if (basis.components(arg, k) < 0.0)
            for (std::size_t c = 0; c < static_cast<std::size_t>(d); ++c) basis.components(c, k) = -basis.components(c, k);
    }
    result.reduced = basis.project(counts);
    return result;
}

}  // namespace simgat
