#pragma once

#include <cstdint>

#include "yoularen/common.hpp"

namespace yoularen {

/// One sampled realization of the initial state and the disturbance sequences.
/// Row t of dx / dy is the disturbance applied at step t.
struct Scenario {
    Vector x0;
    Matrix dx;  // T x n_x
    Matrix dy;  // T x n_y
    std::uint64_t seed = 0;

    long horizon() const { return static_cast<long>(dx.rows()); }
};

/// Closed-loop record. Row t of each matrix is the value at step t.
struct Trajectory {
    Matrix x;  // (T+1) x n_x
    Matrix u;  // T x n_u
    Matrix y;  // T x n_y
    Matrix z;  // T x (n_x + n_u), z_t = (x_t; u_t)
};

}  // namespace yoularen
