#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace simgat {

/// Lower bound on any travel cost entering the model, in minutes.
inline constexpr double kCostFloor = 1.0;

/// Raised when an input violates a precondition. Carries every problem found,
/// not just the first one, so callers can print an itemized report.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::string what)
        : std::runtime_error(what), issues_{std::move(what)} {}

    explicit ValidationError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out;
        for (const auto& s : issues) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

/// Collects validation problems and throws them all at once.
class IssueList {
public:
    void add(std::string issue) { issues_.push_back(std::move(issue)); }
    bool empty() const noexcept { return issues_.empty(); }
    const std::vector<std::string>& items() const noexcept { return issues_; }
    void throw_if_any() const {
        if (!issues_.empty()) throw ValidationError(issues_);
    }

private:
    std::vector<std::string> issues_;
};

/// Row-major dense matrix of doubles. Used for data tables; the autodiff
/// engine has its own tensor type.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::vector<double> row(std::size_t r) const {
        return {data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)};
    }
    std::vector<double> col(std::size_t c) const {
        std::vector<double> out(rows);
        for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
        return out;
    }
    bool operator==(const Matrix&) const = default;
};

/// Formats a double with 17 significant digits (round-trippable).
std::string format_double(double v);

}  // namespace simgat
