#pragma once

#include <optional>
#include <vector>

#include "yoularen/common.hpp"
#include "yoularen/random.hpp"

namespace yoularen::lti {

/// Discrete-time plant x+ = A x + B u + d_x, y = C x + d_y.
struct LtiSystem {
    Matrix A;
    Matrix B;
    Matrix C;

    Eigen::Index nx() const { return A.rows(); }
    Eigen::Index nu() const { return B.cols(); }
    Eigen::Index ny() const { return C.rows(); }

    /// Throws std::invalid_argument on inconsistent shapes or non-finite entries.
    void validate() const;
};

struct CartpoleParams {
    double pole_mass = 0.2;
    double cart_mass = 1.0;
    double pole_length = 0.5;
    double gravity = 9.81;
    double sample_time = 0.08;
};

struct CostWeights {
    Matrix Q;
    Matrix R;
    Matrix Qf;
};

struct NoiseCov {
    Matrix sigma_x;
    Matrix sigma_y;
};

/// State-feedback gain K (u = -K x) and predictor-form observer gain L.
struct GainPair {
    Matrix K;
    Matrix L;
};

struct DareOptions {
    double tol = 1e-10;
    long max_iter = 100000;
};

class DareError : public std::runtime_error {
public:
    DareError(const std::string& what, double residual, long iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

LtiSystem build_cartpole(const CartpoleParams& p = {});

/// One Riccati backup: Q + A'PA - A'PB (R + B'PB)^-1 B'PA.
Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                   const Matrix& P);

/// Frobenius norm of P - riccati_map(P).
double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P);

/// Stabilizing DARE solution by fixed-point (value) iteration from P0 = Q.
/// If `residual_history` is given, the residual of every iterate is appended.
Matrix dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& opts = {}, std::vector<double>* residual_history = nullptr);

/// LQR gain from the control DARE and Kalman predictor gain from the filter DARE
/// on (A', C', Sigma_x, Sigma_y).
GainPair lqg_gains(const LtiSystem& sys, const CostWeights& w, const NoiseCov& n,
                   const DareOptions& opts = {});

/// Time-varying certainty-equivalent LQG policy for a horizon T.
///
/// At step t the policy forms the filtered estimate
///   xf_t = xp_t + M_t (y_t - C xp_t),   u_t = -K_t xf_t,
///   xp_{t+1} = A xf_t + B u_t,
/// starting from xp_0 = 0 with prior covariance `initial_cov`. L_t = A M_t is the
/// equivalent predictor gain.
struct FiniteHorizonLqg {
    std::vector<Matrix> K;
    std::vector<Matrix> M;
    std::vector<Matrix> L;

    std::size_t horizon() const { return K.size(); }
};

FiniteHorizonLqg finite_horizon_lqg(const LtiSystem& sys, const CostWeights& w,
                                    const NoiseCov& n, long T,
                                    const std::optional<Matrix>& initial_cov = std::nullopt);

/// Random symmetric positive definite matrix M'M + eps I with standard normal M.
Matrix random_psd(Rng& rng, Eigen::Index n, double eps = 0.1);

/// Weights and covariances for a randomly tuned (but stabilizing) base LQG controller.
struct RandomLqgDesign {
    CostWeights weights;
    NoiseCov noise;
};

RandomLqgDesign random_lqg_design(const LtiSystem& sys, std::uint64_t seed, double eps = 0.1);

}  // namespace yoularen::lti
