#include "yoularen/youla.hpp"

namespace yoularen::youla {

std::string to_string(Arch a) { return a == Arch::Youla ? "youla" : "feedback"; }

Arch arch_from_string(const std::string& s) {
    if (s == "youla") return Arch::Youla;
    if (s == "feedback") return Arch::Feedback;
    throw ConfigError("unknown arch '" + s + "' (expected youla|feedback)");
}

BaseController BaseController::make(lti::LtiSystem sys, lti::GainPair gains) {
    sys.validate();
    if (gains.K.rows() != sys.nu() || gains.K.cols() != sys.nx() || gains.L.rows() != sys.nx() ||
        gains.L.cols() != sys.ny())
        throw std::invalid_argument("BaseController: gain shapes do not match the plant");
    if (!(spectral_radius(sys.A - sys.B * gains.K) < 1.0) ||
        !(spectral_radius(sys.A - gains.L * sys.C) < 1.0))
        throw std::invalid_argument("BaseController: gains do not stabilize the plant");
    BaseController c{std::move(sys), std::move(gains), Vector()};
    c.xhat = Vector::Zero(c.sys.nx());
    return c;
}

BaseStepResult base_step(const BaseController& ctrl, const Vector& y) {
    const auto& s = ctrl.sys;
    BaseStepResult r{Vector(), Vector(), ctrl};
    r.ytilde = y - s.C * ctrl.xhat;
    r.u = -ctrl.gains.K * ctrl.xhat;
    r.next.xhat = s.A * ctrl.xhat + s.B * r.u + ctrl.gains.L * r.ytilde;
    return r;
}

Policy Policy::make(Arch arch, BaseController base, ren::RenWeights q) {
    // Both arrangements feed the network an n_y-dimensional signal.
    if (q.dims.n_in != base.sys.ny() || q.dims.n_out != base.sys.nu())
        throw std::invalid_argument("Policy: network dimensions do not match the plant");
    Policy p{arch, std::move(base), std::move(q), {}};
    p.reset();
    return p;
}

void Policy::reset() {
    base.xhat = Vector::Zero(base.sys.nx());
    q_state.chi = Vector::Zero(q.dims.n_chi);
}

Vector policy_advance(Policy& p, const Vector& y) {
    Vector next_chi, out;
    Vector u = augmented_advance(p.base, p.arch, y, [&](const Vector& in) {
        ren::ren_forward(p.q, p.q_state.chi, in, next_chi, out);
        return out;
    });
    p.q_state.chi.swap(next_chi);
    return u;
}

PolicyStepResult policy_step(const Policy& p, const Vector& y) {
    PolicyStepResult r{Vector(), p};
    r.u = policy_advance(r.next, y);
    return r;
}

Vector StateSpace::step(Vector& state, const Vector& input) const {
    Vector out = C * state + D * input;
    state = A * state + B * input;
    return out;
}

Matrix StateSpace::simulate(const Matrix& inputs, const Vector& x0) const {
    Vector x = x0.size() == 0 ? Vector::Zero(n_states()) : x0;
    Matrix out(inputs.rows(), n_outputs());
    for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
        const Vector in = inputs.row(t).transpose();
        out.row(t) = step(x, in).transpose();
    }
    return out;
}

TSystems build_T_systems(const lti::LtiSystem& sys, const lti::GainPair& g) {
    sys.validate();
    const Eigen::Index nx = sys.nx(), nu = sys.nu(), ny = sys.ny();
    const Matrix I = Matrix::Identity(nx, nx);
    const Matrix Ak = sys.A - sys.B * g.K;
    const Matrix Al = sys.A - g.L * sys.C;
    if (!(spectral_radius(Ak) < 1.0) || !(spectral_radius(Al) < 1.0))
        throw std::invalid_argument("build_T_systems: gains do not stabilize the plant");

    TSystems ts;
    // T0 state (x_tilde, x), x_tilde = x - xhat.
    auto& t0 = ts.T0;
    t0.A = Matrix::Zero(2 * nx, 2 * nx);
    t0.A.topLeftCorner(nx, nx) = Al;
    t0.A.bottomLeftCorner(nx, nx) = sys.B * g.K;
    t0.A.bottomRightCorner(nx, nx) = Ak;
    t0.B = Matrix::Zero(2 * nx, nx + ny);
    t0.B.topLeftCorner(nx, nx) = I;
    t0.B.topRightCorner(nx, ny) = -g.L;
    t0.B.bottomLeftCorner(nx, nx) = I;
    t0.C = Matrix::Zero(nx + nu, 2 * nx);
    t0.C.topRightCorner(nx, nx) = I;
    t0.C.bottomLeftCorner(nu, nx) = g.K;
    t0.C.bottomRightCorner(nu, nx) = -g.K;
    t0.D = Matrix::Zero(nx + nu, nx + ny);

    // T1 state xi, input u_tilde, readout (xi; u_tilde - K xi).
    auto& t1 = ts.T1;
    t1.A = Ak;
    t1.B = sys.B;
    t1.C = Matrix::Zero(nx + nu, nx);
    t1.C.topRows(nx) = I;
    t1.C.bottomRows(nu) = -g.K;
    t1.D = Matrix::Zero(nx + nu, nu);
    t1.D.bottomRows(nu) = Matrix::Identity(nu, nu);

    // T2 state x_tilde, readout y_tilde = C x_tilde + d_y (the measurement noise enters directly).
    auto& t2 = ts.T2;
    t2.A = Al;
    t2.B = t0.B.topRows(nx);
    t2.C = sys.C;
    t2.D = Matrix::Zero(ny, nx + ny);
    t2.D.rightCols(ny) = Matrix::Identity(ny, ny);
    return ts;
}

double verify_superposition(const lti::LtiSystem& sys, const lti::GainPair& gains,
                            const ren::RenWeights& q, const Scenario& sc) {
    if (sc.x0.size() != sys.nx() || !sc.x0.isZero(0.0))
        throw std::invalid_argument("verify_superposition: requires a zero initial state");
    const long T = sc.horizon();
    const Eigen::Index nx = sys.nx(), nu = sys.nu(), ny = sys.ny();

    // Path 1: the actual closed loop.
    Policy p = Policy::make(Arch::Youla, BaseController::make(sys, gains), q);
    Matrix z_loop(T, nx + nu);
    Vector x = sc.x0;
    for (long t = 0; t < T; ++t) {
        const Vector y = sys.C * x + sc.dy.row(t).transpose();
        const Vector u = policy_advance(p, y);
        z_loop.row(t).head(nx) = x.transpose();
        z_loop.row(t).tail(nu) = u.transpose();
        x = sys.A * x + sys.B * u + sc.dx.row(t).transpose();
    }

    // Path 2: z = T0 d + T1 Q(T2 d).
    const TSystems ts = build_T_systems(sys, gains);
    Matrix d(T, nx + ny);
    d << sc.dx, sc.dy;
    const Matrix ytilde = ts.T2.simulate(d);
    Matrix utilde(T, nu);
    ren::RenState chi{Vector::Zero(q.dims.n_chi)};
    for (long t = 0; t < T; ++t) {
        auto r = ren::ren_step(q, chi, ytilde.row(t).transpose());
        utilde.row(t) = r.output.transpose();
        chi = std::move(r.next);
    }
    const Matrix z_dec = ts.T0.simulate(d) + ts.T1.simulate(utilde);

    double residual = 0.0;
    for (long t = 0; t < T; ++t) residual = std::max(residual, (z_loop.row(t) - z_dec.row(t)).norm());
    return residual;
}

StateSpace linear_controller_as_q(const lti::LtiSystem& sys, const lti::GainPair& base,
                                  const lti::GainPair& other) {
    sys.validate();
    const Eigen::Index nx = sys.nx();
    const Matrix& A = sys.A;
    const Matrix& B = sys.B;
    const Matrix& C = sys.C;
    const Matrix& K2 = other.K;
    const Matrix& L2 = other.L;
    // State (xhat, phi): xhat is a copy of the base observer, phi the other controller's state.
    StateSpace q;
    q.A = Matrix::Zero(2 * nx, 2 * nx);
    q.A.topLeftCorner(nx, nx) = A;
    q.A.topRightCorner(nx, nx) = -B * K2;
    q.A.bottomLeftCorner(nx, nx) = L2 * C;
    q.A.bottomRightCorner(nx, nx) = A - B * K2 - L2 * C;
    q.B = Matrix(2 * nx, sys.ny());
    q.B << base.L, L2;
    q.C = Matrix(sys.nu(), 2 * nx);
    q.C << base.K, -K2;
    q.D = Matrix::Zero(sys.nu(), sys.ny());
    return q;
}

}  // namespace yoularen::youla
