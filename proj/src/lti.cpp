#include "yoularen/lti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace yoularen::lti {

namespace {

std::string shape(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

void require_square(const Matrix& m, Eigen::Index n, const char* name) {
    if (m.rows() != n || m.cols() != n) {
        throw std::invalid_argument(std::string(name) + " must be " + std::to_string(n) + "x" +
                                    std::to_string(n) + ", got " + shape(m));
    }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

void LtiSystem::validate() const {
    if (A.rows() == 0 || A.rows() != A.cols())
        throw std::invalid_argument("A must be square and non-empty, got " + shape(A));
    if (B.rows() != A.rows() || B.cols() == 0)
        throw std::invalid_argument("B must have " + std::to_string(A.rows()) + " rows, got " +
                                    shape(B));
    if (C.cols() != A.rows() || C.rows() == 0)
        throw std::invalid_argument("C must have " + std::to_string(A.rows()) + " columns, got " +
                                    shape(C));
    if (!A.allFinite() || !B.allFinite() || !C.allFinite())
        throw std::invalid_argument("system matrices contain non-finite entries");
}

LtiSystem build_cartpole(const CartpoleParams& p) {
    for (double v : {p.pole_mass, p.cart_mass, p.pole_length, p.gravity, p.sample_time}) {
        if (!std::isfinite(v)) throw std::invalid_argument("cart-pole parameters must be finite");
    }
    if (p.pole_mass <= 0 || p.cart_mass <= 0 || p.pole_length <= 0 || p.gravity <= 0)
        throw std::invalid_argument("cart-pole masses, length and gravity must be positive");
    if (p.sample_time < 0) throw std::invalid_argument("cart-pole sample time must be >= 0");

    const double dt = p.sample_time;
    LtiSystem sys;
    sys.A = Matrix::Identity(4, 4);
    sys.A(0, 1) = dt;
    sys.A(1, 2) = -p.pole_mass * p.gravity * dt / p.cart_mass;
    sys.A(2, 3) = dt;
    sys.A(3, 2) = (p.cart_mass + p.pole_mass) * p.gravity * dt / (p.pole_length * p.cart_mass);
    sys.B = Matrix::Zero(4, 1);
    sys.B(1, 0) = dt / p.cart_mass;
    sys.B(3, 0) = -dt / p.cart_mass;
    sys.C = Matrix::Zero(2, 4);
    sys.C(0, 0) = 1.0;
    sys.C(1, 2) = 1.0;
    return sys;
}

Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                   const Matrix& P) {
    const Matrix PA = P * A;
    const Matrix BtPA = B.transpose() * PA;
    const Matrix S = R + B.transpose() * P * B;
    const Matrix gain = S.ldlt().solve(BtPA);
    return symmetrize(Q + A.transpose() * PA - BtPA.transpose() * gain);
}

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P) {
    return (P - riccati_map(A, B, Q, R, P)).norm();
}

Matrix dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& opts, std::vector<double>* residual_history) {
    const Eigen::Index n = A.rows();
    require_square(A, n, "A");
    require_square(Q, n, "Q");
    if (B.rows() != n) throw std::invalid_argument("B must have as many rows as A");
    require_square(R, B.cols(), "R");
    if (!A.allFinite() || !B.allFinite() || !Q.allFinite() || !R.allFinite())
        throw std::invalid_argument("dare_solve: non-finite input");

    Eigen::LLT<Matrix> r_chol(symmetrize(R));
    if (r_chol.info() != Eigen::Success || !R.isApprox(R.transpose(), 1e-12))
        throw std::invalid_argument("dare_solve: R must be symmetric positive definite");
    if (n > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> qeig(symmetrize(Q), Eigen::EigenvaluesOnly);
        if (qeig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, Q.norm()))
            throw std::invalid_argument("dare_solve: Q must be positive semidefinite");
    }

    Matrix P = symmetrize(Q);
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 0; it <= opts.max_iter; ++it) {
        Matrix next = riccati_map(A, B, Q, R, P);
        residual = (next - P).norm();
        if (residual_history) residual_history->push_back(residual);
        if (!std::isfinite(residual))
            throw DareError("dare_solve: iteration diverged", residual, it);
        if (residual <= opts.tol) return P;
        P = std::move(next);
    }
    throw DareError("dare_solve: no convergence within " + std::to_string(opts.max_iter) +
                        " iterations (residual " + std::to_string(residual) + ")",
                    residual, opts.max_iter);
}

GainPair lqg_gains(const LtiSystem& sys, const CostWeights& w, const NoiseCov& n,
                   const DareOptions& opts) {
    sys.validate();
    const Matrix& A = sys.A;
    const Matrix& B = sys.B;
    const Matrix& C = sys.C;

    const Matrix P = dare_solve(A, B, w.Q, w.R, opts);
    GainPair g;
    g.K = (w.R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);

    const Matrix S = dare_solve(A.transpose(), C.transpose(), n.sigma_x, n.sigma_y, opts);
    const Matrix innov = C * S * C.transpose() + n.sigma_y;
    // L = A S C' innov^-1, computed as a solve on the transposed system.
    g.L = innov.ldlt().solve(C * S * A.transpose()).transpose();

    const double rho_k = spectral_radius(A - B * g.K);
    const double rho_l = spectral_radius(A - g.L * C);
    if (!(rho_k < 1.0) || !(rho_l < 1.0)) {
        throw std::runtime_error("lqg_gains: synthesized gains are not stabilizing (rho(A-BK)=" +
                                 std::to_string(rho_k) + ", rho(A-LC)=" + std::to_string(rho_l) +
                                 "); check stabilizability/detectability");
    }
    return g;
}

FiniteHorizonLqg finite_horizon_lqg(const LtiSystem& sys, const CostWeights& w,
                                    const NoiseCov& n, long T,
                                    const std::optional<Matrix>& initial_cov) {
    sys.validate();
    if (T < 1) throw std::invalid_argument("finite_horizon_lqg: horizon must be >= 1");
    const Matrix& A = sys.A;
    const Matrix& B = sys.B;
    const Matrix& C = sys.C;

    FiniteHorizonLqg out;
    out.K.resize(T);
    out.M.resize(T);
    out.L.resize(T);

    // Backward Riccati recursion seeded at the terminal weight.
    Matrix P = w.Qf;
    for (long t = T - 1; t >= 0; --t) {
        const Matrix S = w.R + B.transpose() * P * B;
        Eigen::LLT<Matrix> chol(symmetrize(S));
        if (chol.info() != Eigen::Success)
            throw std::runtime_error("finite_horizon_lqg: R + B'PB is not positive definite");
        out.K[t] = chol.solve(B.transpose() * P * A);
        P = symmetrize(w.Q + A.transpose() * P * (A - B * out.K[t]));
    }

    // Forward Kalman recursion seeded at the prior covariance of x0. Innovation
    // directions below a relative floor are treated as noise-free and dropped:
    // without measurement noise the covariance collapses to roundoff once the state
    // is observed, and inverting that roundoff gives arbitrary gains.
    Matrix sigma = initial_cov.value_or(Matrix::Identity(sys.nx(), sys.nx()));
    double floor = 0.0;
    for (long t = 0; t < T; ++t) {
        const Matrix innov = symmetrize(C * sigma * C.transpose() + n.sigma_y);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(innov);
        const Vector& lam = eig.eigenvalues();
        if (t == 0)
            floor = 1e-12 * std::max({lam.cwiseAbs().maxCoeff(), n.sigma_y.norm(),
                                      C.squaredNorm() * n.sigma_x.norm()});
        Vector inv = Vector::Zero(lam.size());
        for (Eigen::Index i = 0; i < lam.size(); ++i)
            if (lam(i) > floor) inv(i) = 1.0 / lam(i);
        out.M[t] = sigma * C.transpose() * eig.eigenvectors() * inv.asDiagonal() *
                   eig.eigenvectors().transpose();
        if (!out.M[t].allFinite())
            throw NumericalError("finite_horizon_lqg: non-finite filter gain", t);
        out.L[t] = A * out.M[t];
        const Matrix filtered = symmetrize(sigma - out.M[t] * C * sigma);
        sigma = symmetrize(A * filtered * A.transpose() + n.sigma_x);
    }
    return out;
}

Matrix random_psd(Rng& rng, Eigen::Index n, double eps) {
    const Matrix m = standard_normal(rng, n, n);
    return m.transpose() * m + eps * Matrix::Identity(n, n);
}

RandomLqgDesign random_lqg_design(const LtiSystem& sys, std::uint64_t seed, double eps) {
    Rng rng(derive_seed(seed, {kBaseStream}));
    RandomLqgDesign d;
    d.weights.Q = random_psd(rng, sys.nx(), eps);
    d.weights.R = random_psd(rng, sys.nu(), eps);
    d.weights.Qf = d.weights.Q;
    d.noise.sigma_x = random_psd(rng, sys.nx(), eps);
    d.noise.sigma_y = random_psd(rng, sys.ny(), eps);
    return d;
}

}  // namespace yoularen::lti
