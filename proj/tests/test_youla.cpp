#include <doctest.h>

#include <cmath>

#include "yoularen/random.hpp"
#include "yoularen/rollout.hpp"
#include "yoularen/youla.hpp"

using namespace yoularen;
using namespace yoularen::youla;

namespace {

lti::LtiSystem cartpole() { return lti::build_cartpole(); }

lti::GainPair base_gains(const lti::LtiSystem& sys, std::uint64_t seed = 0) {
    const auto d = lti::random_lqg_design(sys, seed);
    return lti::lqg_gains(sys, d.weights, d.noise);
}

rollout::TaskSpec lqg_task(long T = 50) {
    auto t = rollout::cartpole_task(rollout::TaskKind::Lqg);
    t.T = T;
    return t;
}

lti::LtiSystem scalar_plant() {
    return {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)};
}

}  // namespace

TEST_CASE("base controller step") {
    const auto sys = scalar_plant();
    const lti::GainPair g{Matrix::Constant(1, 1, 0.618), Matrix::Constant(1, 1, 0.5)};
    auto ctrl = BaseController::make(sys, g);

    auto r0 = base_step(ctrl, Vector::Zero(1));
    CHECK(r0.u(0) == 0.0);
    CHECK(r0.ytilde(0) == 0.0);
    CHECK(r0.next.xhat(0) == 0.0);

    ctrl.xhat(0) = 1.0;
    const auto r = base_step(ctrl, Vector::Constant(1, 2.0));
    CHECK(r.ytilde(0) == 1.0);
    CHECK(r.u(0) == doctest::Approx(-0.618).epsilon(1e-15));
    CHECK(r.next.xhat(0) == doctest::Approx(0.882).epsilon(1e-14));

    // Perfect prediction: no innovation, the observer follows A - BK.
    const auto p = base_step(ctrl, sys.C * ctrl.xhat);
    CHECK(p.ytilde.norm() == 0.0);
    CHECK(p.next.xhat(0) == doctest::Approx(1.0 - 0.618).epsilon(1e-15));
}

TEST_CASE("base controller refuses destabilizing gains") {
    const auto sys = scalar_plant();
    const lti::GainPair g{Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 0.5)};
    CHECK_THROWS(BaseController::make(sys, g));
}

TEST_CASE("zero operator reproduces the base controller bit for bit") {
    const auto sys = cartpole();
    const auto g = base_gains(sys);
    for (auto arch : {Arch::Youla, Arch::Feedback}) {
        auto p = Policy::make(arch, BaseController::make(sys, g),
                              ren::RenWeights::zeros(ren::RenDims{10, 20, 2, 1}));
        auto base = BaseController::make(sys, g);
        Rng rng(1);
        for (int t = 0; t < 100; ++t) {
            const Vector y = standard_normal(rng, 2);
            const auto b = base_step(base, y);
            const auto q = policy_step(p, y);
            CHECK((b.u.array() == q.u.array()).all());
            CHECK((b.next.xhat.array() == q.next.base.xhat.array()).all());
            base = b.next;
            p = q.next;
        }
    }
}

TEST_CASE("scalar plant with the scalar network") {
    const auto sys = scalar_plant();
    const lti::GainPair g{Matrix::Constant(1, 1, 0.618), Matrix::Constant(1, 1, 0.5)};
    auto q = ren::RenWeights::zeros(ren::RenDims{1, 1, 1, 1});
    q.A(0, 0) = 0.5;
    q.B1(0, 0) = 0.25;
    q.C1(0, 0) = 1.0;
    q.D12(0, 0) = 1.0;
    q.C2(0, 0) = 1.0;
    auto p = Policy::make(Arch::Youla, BaseController::make(sys, g), q);
    p.q_state.chi(0) = 1.0;
    // xhat = 0, y = 1: ytilde = 1, network output 1 (see the network's own example), u = 0 + 1.
    const auto r = policy_step(p, Vector::Constant(1, 1.0));
    CHECK(r.u(0) == 1.0);
    CHECK(r.next.q_state.chi(0) == 1.0);
    // Observer driven by the applied input: 0 + 1 * 1 + 0.5 * 1.
    CHECK(r.next.base.xhat(0) == 1.5);
}

TEST_CASE("zero innovation leaves only the bias path") {
    const auto sys = cartpole();
    const auto g = base_gains(sys);
    auto th = ren::RenTheta::random(ren::RenDims{4, 6, 2, 1}, 3, 0.95, 1.0);
    const auto w_nobias = ren::direct_param(th);
    auto p = Policy::make(Arch::Youla, BaseController::make(sys, g), w_nobias);
    for (int t = 0; t < 20; ++t) {
        const Vector y = sys.C * p.base.xhat;
        const auto r = policy_step(p, y);
        // Zero biases and zero network state: the network stays silent.
        CHECK(r.u.isApprox(-g.K * p.base.xhat, 0.0));
        p = r.next;
    }
}

TEST_CASE("closed-loop maps are stable and consistent at DC") {
    const auto sys = cartpole();
    const auto g = base_gains(sys);
    const auto ts = build_T_systems(sys, g);
    for (const StateSpace* s : {&ts.T0, &ts.T1, &ts.T2}) CHECK(spectral_radius(s->A) < 1.0);

    const Matrix zero = ts.T2.simulate(Matrix::Zero(30, 6));
    CHECK(zero.norm() == 0.0);
    CHECK(ts.T0.simulate(Matrix::Zero(30, 6)).norm() == 0.0);

    // Constant disturbance: T2 settles at C (I - (A - LC))^-1 (dx - L dy) + dy.
    Vector dx(4), dy(2);
    dx << 0.1, -0.2, 0.05, 0.3;
    dy << -0.4, 0.25;
    Matrix d(2000, 6);
    for (Eigen::Index t = 0; t < d.rows(); ++t) d.row(t) << dx.transpose(), dy.transpose();
    const Matrix out = ts.T2.simulate(d);
    const Matrix Al = sys.A - g.L * sys.C;
    const Vector xs = (Matrix::Identity(4, 4) - Al).partialPivLu().solve(dx - g.L * dy);
    const Vector expected = sys.C * xs + dy;
    CHECK((out.row(d.rows() - 1).transpose() - expected).norm() <= 1e-9);
}

TEST_CASE("superposition identity with random networks") {
    const auto sys = cartpole();
    const auto g = base_gains(sys);
    const ren::RenDims dims{10, 20, 2, 1};
    for (std::uint64_t k = 0; k < 25; ++k) {
        const auto w = ren::direct_param(ren::RenTheta::random(dims, 40 + k, 0.95, 1.0));
        auto s = rollout::sample_scenario(sys, lqg_task(), 80 + k);
        s.x0.setZero();
        CHECK(verify_superposition(sys, g, w, s) <= 1e-8);
    }
    // Zero operator: the closed loop is T0 d itself.
    auto s = rollout::sample_scenario(sys, lqg_task(), 1);
    s.x0.setZero();
    CHECK(verify_superposition(sys, g, ren::RenWeights::zeros(dims), s) <= 1e-12);
    s.x0(0) = 0.1;
    CHECK_THROWS_AS(verify_superposition(sys, g, ren::RenWeights::zeros(dims), s), std::invalid_argument);
}

TEST_CASE("linear operator: superposition and direct closed-loop algebra agree") {
    const auto sys = cartpole();
    const auto g = base_gains(sys);
    const ren::RenDims dims{3, 0, 2, 1};
    const auto w = ren::direct_param(ren::RenTheta::random(dims, 9, 0.95, 1.0));
    auto s = rollout::sample_scenario(sys, lqg_task(), 2);
    s.x0.setZero();
    CHECK(verify_superposition(sys, g, w, s) <= 1e-10);

    // Joint state (x, xhat, chi) of the closed loop written as one linear system.
    const Matrix &A = sys.A, &B = sys.B, &C = sys.C, &K = g.K, &L = g.L;
    const Eigen::Index n = 4 + 4 + 3;
    Matrix Acl = Matrix::Zero(n, n), Bcl = Matrix::Zero(n, 6), Ccl = Matrix::Zero(5, n),
           Dcl = Matrix::Zero(5, 6);
    // u = -K xhat + C2 chi + D22 (C x - C xhat + dy)
    Matrix Ux(1, n);
    Ux << w.D22 * C, -K - w.D22 * C, w.C2;
    const Matrix Ud = (Matrix(1, 6) << Matrix::Zero(1, 4), w.D22).finished();
    Acl.block(0, 0, 4, n) = B * Ux;
    Acl.block(0, 0, 4, 4) += A;
    Bcl.block(0, 0, 4, 6) = B * Ud;
    Bcl.block(0, 0, 4, 4) += Matrix::Identity(4, 4);
    Acl.block(4, 0, 4, n) = B * Ux;
    Acl.block(4, 0, 4, 4) += L * C;
    Acl.block(4, 4, 4, 4) += A - L * C;
    Bcl.block(4, 0, 4, 6) = B * Ud;
    Bcl.block(4, 4, 4, 2) += L;
    Acl.block(8, 0, 3, 4) = w.B2 * C;
    Acl.block(8, 4, 3, 4) = -w.B2 * C;
    Acl.block(8, 8, 3, 3) = w.A;
    Bcl.block(8, 4, 3, 2) = w.B2;
    Ccl.block(0, 0, 4, 4) = Matrix::Identity(4, 4);
    Ccl.block(4, 0, 1, n) = Ux;
    Dcl.block(4, 0, 1, 6) = Ud;
    const StateSpace cl{Acl, Bcl, Ccl, Dcl};
    Matrix d(s.horizon(), 6);
    d << s.dx, s.dy;
    const Matrix z_alg = cl.simulate(d);
    const auto tr = rollout::simulate(sys, Policy::make(Arch::Youla, BaseController::make(sys, g), w), s);
    CHECK((z_alg - tr.z).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("a linear controller rewritten as an operator reproduces its closed loop") {
    const auto sys = cartpole();
    const auto base = base_gains(sys, 0);
    const auto other = base_gains(sys, 5);
    const auto q = linear_controller_as_q(sys, base, other);
    const auto s = rollout::sample_scenario(sys, lqg_task(), 3);

    // Direct loop with the other controller.
    auto ctrl = BaseController::make(sys, other);
    Vector x = s.x0, xa = s.x0;
    // Youla loop around the base controller with the linear operator.
    auto b = BaseController::make(sys, base);
    Vector qs = Vector::Zero(q.n_states());
    double worst = 0.0;
    for (long t = 0; t < s.horizon(); ++t) {
        const Vector y = sys.C * x + s.dy.row(t).transpose();
        const auto r = base_step(ctrl, y);
        ctrl = r.next;
        x = sys.A * x + sys.B * r.u + s.dx.row(t).transpose();

        const Vector ya = sys.C * xa + s.dy.row(t).transpose();
        const Vector u = augmented_advance(b, Arch::Youla, ya, [&](const Vector& yt) { return q.step(qs, yt); });
        xa = sys.A * xa + sys.B * u + s.dx.row(t).transpose();
        worst = std::max(worst, (u - r.u).norm());
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("closed loop forgets its initial condition for arbitrary parameters") {
    const auto sys = cartpole();
    const auto g = base_gains(sys, 1);
    const ren::RenDims dims{10, 20, 2, 1};
    const auto s = rollout::sample_scenario(sys, lqg_task(400), 4);
    for (std::uint64_t k = 0; k < 10; ++k) {
        const auto w = ren::direct_param(ren::RenTheta::random(dims, 60 + k, 0.95, 1.0));
        const auto p = Policy::make(Arch::Youla, BaseController::make(sys, g), w);
        Rng rng(k);
        const auto probe = rollout::contraction_probe(sys, p, s, standard_normal(rng, 18), standard_normal(rng, 18));
        CHECK(probe.ratio <= 1e-2);
        CHECK(std::isfinite(probe.max_state));
    }
}

TEST_CASE("feedback structure can destabilize where the Youla structure cannot") {
    const auto sys = cartpole();
    const auto g = base_gains(sys);
    const ren::RenDims dims{0, 0, 2, 1};
    auto th = ren::RenTheta::zeros(dims);
    th.out_scale = 300.0;
    th.D22 << 0.0, 1e12;  // u = 300 * angle pushes the pole further over
    const auto w = ren::direct_param(th);
    const auto s = rollout::sample_scenario(sys, lqg_task(200), 5);
    const auto youla = rollout::simulate(sys, Policy::make(Arch::Youla, BaseController::make(sys, g), w), s);
    CHECK(rollout::max_state_norm(youla) < 1e6);
    bool diverged = false;
    try {
        const auto fb = rollout::simulate(sys, Policy::make(Arch::Feedback, BaseController::make(sys, g), w), s);
        diverged = rollout::max_state_norm(fb) > 1e6;
    } catch (const NumericalError&) {
        diverged = true;
    }
    CHECK(diverged);
}
