#pragma once

// Seeded, splittable random streams. Every (seed, stream...) tuple maps to an
// independent mt19937_64, so a trial's draws do not depend on how many other
// trials run or in which order.

#include <cstdint>
#include <initializer_list>
#include <random>

#include "ridgeless/pinv.hpp"

namespace ridgeless {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream for (seed, keys...), e.g. make_rng(seed, {n, trial}).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
    std::uint64_t s = splitmix64(seed);
    for (const std::uint64_t k : keys) {
        s = splitmix64(s ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    }
    return Rng(s);
}

inline Matrix gaussian_matrix(Rng& rng, Index rows, Index cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

inline Vector gaussian_vector(Rng& rng, Index n) {
    return gaussian_matrix(rng, n, 1).col(0);
}

}  // namespace ridgeless
