#pragma once

#include <cstdint>
#include <random>

namespace simgat {

/// Seeded generator used by every stochastic routine in the project.
///
/// Bit source is std::mt19937_64. Derived variates use fixed, documented
/// algorithms so other implementations can reproduce the distributions:
///   uniform()  top 53 bits of one draw scaled by 2^-53, in [0, 1)
///   normal()   Box-Muller, cosine branch only (one normal per two uniforms)
///   poisson()  inversion for mean < 30, PTRS (Hormann 1993) otherwise
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double lognormal(double mu, double sigma);
    std::uint64_t poisson(double mean);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    std::uint64_t next() { return engine_(); }

    /// Fisher-Yates shuffle driven by below().
    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::uint64_t poisson_inversion(double mean);
    std::uint64_t poisson_ptrs(double mean);

    std::mt19937_64 engine_;
};

}  // namespace simgat
