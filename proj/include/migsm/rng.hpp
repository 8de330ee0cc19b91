#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace migsm {

// Deterministic random helpers. std::mt19937_64's raw output sequence is
// fixed by the standard, but std::uniform_real_distribution is not, so all
// variates here are built directly from raw 64-bit draws to keep results
// bit-identical across compilers and platforms.

inline double u01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53; // [0,1)
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * u01(gen);
}

inline int uniform_int(std::mt19937_64& gen, int n) {
    // modulo bias is irrelevant at our n << 2^64
    return static_cast<int>(gen() % static_cast<std::uint64_t>(n));
}

namespace detail {
inline double halton(std::uint64_t index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}
inline constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
} // namespace detail

// n scrambled low-discrepancy points in [0,1)^dim: a Halton sequence with a
// seeded Cranley-Patterson rotation per dimension. Deterministic given seed.
inline std::vector<std::vector<double>> low_discrepancy_points(int n, int dim,
                                                               std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<double> shift(dim);
    for (int d = 0; d < dim; ++d) shift[d] = u01(gen);
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) {
            double v = detail::halton(static_cast<std::uint64_t>(i) + 1,
                                      detail::primes[d % 20]) + shift[d];
            pts[i][d] = v - std::floor(v);
        }
    return pts;
}

} // namespace migsm
