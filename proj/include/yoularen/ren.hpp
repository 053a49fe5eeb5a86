#pragma once

#include <cstdint>
#include <functional>

#include "yoularen/common.hpp"

namespace yoularen::ren {

/// Sizes of a recurrent equilibrium network. n_chi = 0 gives the memoryless (LBEN) case.
struct RenDims {
    long n_chi = 10;
    long n_v = 20;
    long n_in = 1;
    long n_out = 1;

    void validate() const;
    /// Length of the flattened free-parameter vector.
    long num_params() const;

    friend bool operator==(const RenDims&, const RenDims&) = default;
};

/// Default bound on the input and output blocks (see direct_param).
inline constexpr double kDefaultOutScale = 10.0;

/// Unconstrained parameters. Every finite value maps to a contracting network
/// with a bounded incremental l2 gain.
///
/// `alpha_bar` (contraction budget) and `out_scale` (norm bound of the input and
/// output blocks) are fixed configuration values and are not part of the flat
/// vector. All matrices and biases are trainable.
struct RenTheta {
    RenDims dims;
    Matrix A_free;    // n_chi x n_chi
    Matrix B1_free;   // n_chi x n_v
    Matrix B2;        // n_chi x n_in
    Matrix C1_free;   // n_v x n_chi
    Matrix D11_free;  // n_v x n_v, only the strict lower triangle survives
    Matrix D12;       // n_v x n_in
    Matrix C2;        // n_out x n_chi
    Matrix D21;       // n_out x n_v
    Matrix D22;       // n_out x n_in
    Vector b_chi;
    Vector b_v;
    Vector b_y;
    double alpha_bar = 0.95;
    double out_scale = kDefaultOutScale;

    static RenTheta zeros(const RenDims& dims, double alpha_bar = 0.95,
                          double out_scale = kDefaultOutScale);

    /// Standard initialization: free blocks ~ N(0, 1) entrywise, except C2, D21 and
    /// D22, which are drawn with standard deviation output_gain / out_scale so that the
    /// explicit output blocks start near output_gain * N(0, 1). Biases are zero. The
    /// small default keeps the initial network output close to zero.
    static RenTheta random(const RenDims& dims, std::uint64_t seed, double alpha_bar = 0.95,
                           double output_gain = 0.01, double out_scale = kDefaultOutScale);

    /// Canonical flat layout: blocks in W row order (A, B1, B2, C1, D11, D12, C2,
    /// D21, D22), each row-major, then the biases b_chi, b_v, b_y.
    Vector to_flat() const;
    static RenTheta from_flat(const Eigen::Ref<const Vector>& flat, const RenDims& dims,
                              double alpha_bar, double out_scale = kDefaultOutScale);
};

/// Explicit network matrices of the feedback interconnection
///   chi+ = A chi + B1 w + B2 u + b_chi
///   v    = C1 chi + D11 w + D12 u + b_v,   w = relu(v)
///   y    = C2 chi + D21 w + D22 u + b_y
struct RenWeights {
    RenDims dims;
    Matrix A, B1, B2, C1, D11, D12, C2, D21, D22;
    Vector b_chi, b_v, b_y;
    double alpha_bar = 0.95;

    /// All-zero network of the given size (output identically zero).
    static RenWeights zeros(const RenDims& dims, double alpha_bar = 0.95);
};

/// N_c(M) = c M / (1 + |M|_F): smooth, and |N_c(M)|_F < c for every M.
Matrix smooth_normalize(const Matrix& m, double budget);

/// Vector-Jacobian product of smooth_normalize: returns dL/dM given dL/dN.
Matrix smooth_normalize_vjp(const Matrix& m, double budget, const Matrix& upstream);

using Normalizer = std::function<Matrix(const Matrix&, double)>;

/// Budget constants used by direct_param.
struct Budgets {
    double a;    // |A|
    double bc;   // |B1| and |C1|
    double d11;  // |D11|
    static Budgets for_alpha(double alpha_bar);
};

/// Map free parameters to explicit weights satisfying
///   |A|_2 + 2 |B1|_2 |C1|_2 <= alpha_bar,  |D11|_2 < 1/2,
///   |B2|, |D12|, |C2|, |D21|, |D22| < out_scale.
/// `normalizer` exists so verification can inject a broken map.
RenWeights direct_param(const RenTheta& theta, const Normalizer& normalizer = smooth_normalize);

/// |A|_2 + 2 |B1|_2 |C1|_2, the quantity bounded by direct_param.
double budget_bound(const RenWeights& w);

/// Lipschitz constants of the explicit network, all in the Euclidean norm.
struct LipschitzBounds {
    double L_w;       // neuron output w.r.t. state
    double L_wu;      // neuron output w.r.t. input
    double alpha;     // incremental contraction factor |A| + |B1| L_w
    double L_u;       // next state w.r.t. input
    double L_yx;      // output w.r.t. state
    double L_yu;      // output w.r.t. input
};

LipschitzBounds lipschitz_bounds(const RenWeights& w);

/// Certified incremental l2 gain L_yu + L_yx L_u / (1 - alpha).
/// Throws std::domain_error when alpha >= 1 (no certificate).
double certified_gain(const RenWeights& w);

struct RenState {
    Vector chi;
};

struct RenStepResult {
    RenState next;
    Vector output;
};

/// One explicit evaluation. Neurons are resolved in index order because D11 is
/// strictly lower triangular. Throws NumericalError on non-finite input.
RenStepResult ren_step(const RenWeights& w, const RenState& state, const Vector& input);

/// In-place evaluation used by rollouts. Optionally records pre-activations v and
/// activations w (each of length n_v) for reverse-mode differentiation.
void ren_forward(const RenWeights& w, const Vector& chi, const Vector& input, Vector& next_chi,
                 Vector& output, Vector* v_out = nullptr, Vector* w_out = nullptr);

struct RenReport {
    double max_decay_ratio = 0.0;
    double empirical_gain = 0.0;
};

/// Empirical contraction and gain check by simulation (see README for the protocol).
RenReport verify_ren(const RenWeights& w, int trials, int horizon, std::uint64_t seed);

}  // namespace yoularen::ren
