#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "yoularen/common.hpp"

namespace yoularen {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for combining small integers into seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive a child seed from a parent seed and a path of indices, e.g.
/// derive_seed(run_seed, {kTrainStream, epoch, j}). Order-sensitive.
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(parent);
    for (auto p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

// Stream tags keep the seed spaces of different consumers disjoint.
inline constexpr std::uint64_t kTrainStream = 0x7472'6169'6eULL;
inline constexpr std::uint64_t kTestStream = 0x7465'7374ULL;
inline constexpr std::uint64_t kInitStream = 0x696e'6974ULL;
inline constexpr std::uint64_t kArsStream = 0x6172'73ULL;
inline constexpr std::uint64_t kBaseStream = 0x6261'7365ULL;

inline Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Matrix m(rows, cols);
    // Row-major fill so the draw order matches the serialized layout.
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n01(rng);
    return m;
}

inline Vector standard_normal(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = n01(rng);
    return v;
}

}  // namespace yoularen
