#include <algorithm>
#include <cmath>

#include "simgat/domain.hpp"

namespace simgat {

namespace {

double forward(const ColumnStat& s, double x) { return ((s.is_log ? std::log1p(x) : x) - s.mean) / s.sd; }

}  // namespace

Standardized standardize_features(const Matrix& raw, std::span<const std::size_t> long_tail_columns,
                                  const std::vector<std::string>& names) {
    if (!names.empty() && names.size() != raw.cols) {
        throw ValidationError("standardize: " + std::to_string(names.size()) + " names for " +
                              std::to_string(raw.cols) + " columns");
    }
    IssueList issues;
    std::vector<bool> is_log(raw.cols, false);
    for (std::size_t c : long_tail_columns) {
        if (c >= raw.cols) {
            issues.add("standardize: long-tail column " + std::to_string(c) + " out of range");
            continue;
        }
        is_log[c] = true;
    }
    for (std::size_t r = 0; r < raw.rows; ++r) {
        for (std::size_t c = 0; c < raw.cols; ++c) {
            const double v = raw(r, c);
            if (!std::isfinite(v)) {
                issues.add("standardize: non-finite value in column " + std::to_string(c) + " row " + std::to_string(r));
            } else if (is_log[c] && v < 0.0) {
                issues.add("standardize: negative value in log column " + std::to_string(c) + " row " +
                           std::to_string(r));
            }
        }
    }
    issues.throw_if_any();

    Standardized out{Matrix(raw.rows, raw.cols), {}};
    out.stats.columns.resize(raw.cols);
    const double n = static_cast<double>(std::max<std::size_t>(raw.rows, 1));
    for (std::size_t c = 0; c < raw.cols; ++c) {
        ColumnStat& s = out.stats.columns[c];
        s.name = names.empty() ? "col" + std::to_string(c) : names[c];
        s.is_log = is_log[c];
        double mean = 0.0;
        for (std::size_t r = 0; r < raw.rows; ++r) mean += is_log[c] ? std::log1p(raw(r, c)) : raw(r, c);
        mean /= n;
        double var = 0.0;
        for (std::size_t r = 0; r < raw.rows; ++r) {
            const double d = (is_log[c] ? std::log1p(raw(r, c)) : raw(r, c)) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / n);
        s.mean = mean;
        s.sd = sd > 1e-12 * std::max(1.0, std::fabs(mean)) ? sd : 1.0;
        for (std::size_t r = 0; r < raw.rows; ++r) out.values(r, c) = forward(s, raw(r, c));
    }
    return out;
}

Matrix ColumnStats::apply(const Matrix& raw) const {
    if (raw.cols != columns.size()) {
        throw ValidationError("column stats cover " + std::to_string(columns.size()) + " columns, matrix has " +
                              std::to_string(raw.cols));
    }
    Matrix out(raw.rows, raw.cols);
    for (std::size_t r = 0; r < raw.rows; ++r)
        for (std::size_t c = 0; c < raw.cols; ++c) out(r, c) = forward(columns[c], raw(r, c));
    return out;
}

double ColumnStats::invert_value(std::size_t column, double standardized) const {
    const ColumnStat& s = columns.at(column);
    const double v = standardized * s.sd + s.mean;
    return s.is_log ? std::expm1(v) : v;
}

Matrix ColumnStats::invert(const Matrix& standardized) const {
    Matrix out(standardized.rows, standardized.cols);
    for (std::size_t r = 0; r < standardized.rows; ++r)
        for (std::size_t c = 0; c < standardized.cols; ++c) out(r, c) = invert_value(c, standardized(r, c));
    return out;
}

std::optional<std::size_t> ColumnStats::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    return std::nullopt;
}

}  // namespace simgat
