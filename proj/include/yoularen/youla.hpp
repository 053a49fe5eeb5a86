#pragma once

#include <string>

#include "yoularen/lti.hpp"
#include "yoularen/ren.hpp"
#include "yoularen/scenario.hpp"

namespace yoularen::youla {

/// How the learned operator is attached to the base controller.
///  - Youla:    u = -K xhat + Q(y - C xhat)
///  - Feedback: u = -K xhat + K_theta(y)
/// In both cases the observer is driven by the applied input u.
enum class Arch { Youla, Feedback };

std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);

/// Observer-based linear controller: u = -K xhat, xhat+ = A xhat + B u + L (y - C xhat).
struct BaseController {
    lti::LtiSystem sys;
    lti::GainPair gains;
    Vector xhat;

    /// Zero observer state. Throws if the gains do not stabilize `sys`.
    static BaseController make(lti::LtiSystem sys, lti::GainPair gains);
};

struct BaseStepResult {
    Vector u;
    Vector ytilde;
    BaseController next;
};

BaseStepResult base_step(const BaseController& ctrl, const Vector& y);

/// One step of the augmented controller with an arbitrary operator `q`
/// (callable Vector -> Vector that advances its own state). Returns the applied
/// input and updates the observer state in place.
template <class QOp>
Vector augmented_advance(BaseController& base, Arch arch, const Vector& y, QOp&& q) {
    const auto& s = base.sys;
    Vector ytilde = y - s.C * base.xhat;
    const Vector correction = q(arch == Arch::Youla ? ytilde : y);
    Vector u = -base.gains.K * base.xhat + correction;
    base.xhat = s.A * base.xhat + s.B * u + base.gains.L * ytilde;
    return u;
}

/// Base controller plus a REN operator and its state.
struct Policy {
    Arch arch = Arch::Youla;
    BaseController base;
    ren::RenWeights q;
    ren::RenState q_state;

    /// Zero observer and network state.
    static Policy make(Arch arch, BaseController base, ren::RenWeights q);
    /// Reset observer and network state to zero.
    void reset();
};

struct PolicyStepResult {
    Vector u;
    Policy next;
};

PolicyStepResult policy_step(const Policy& p, const Vector& y);

/// In-place variant of policy_step used by rollouts.
Vector policy_advance(Policy& p, const Vector& y);

/// Linear state-space system x+ = A x + B u, y = C x + D u.
struct StateSpace {
    Matrix A, B, C, D;

    Eigen::Index n_states() const { return A.rows(); }
    Eigen::Index n_inputs() const { return B.cols(); }
    Eigen::Index n_outputs() const { return C.rows(); }

    /// Returns the output at the current state and advances `state`.
    Vector step(Vector& state, const Vector& input) const;
    /// Row-wise simulation of an input sequence (T x n_inputs) from `x0` (zero if empty).
    Matrix simulate(const Matrix& inputs, const Vector& x0 = {}) const;
};

/// Closed-loop maps under the base controller, with d = (d_x; d_y) and z = (x; u):
///   T0: d -> z with Q = 0, T1: u_tilde -> z, T2: d -> y_tilde.
struct TSystems {
    StateSpace T0, T1, T2;
};

TSystems build_T_systems(const lti::LtiSystem& sys, const lti::GainPair& gains);

/// max_t |z_t - (T0 d + T1 Q(T2 d))_t| between the simulated Youla closed loop and the
/// decomposed response. Requires zero initial plant state (observer and Q start at zero).
double verify_superposition(const lti::LtiSystem& sys, const lti::GainPair& gains,
                            const ren::RenWeights& q, const Scenario& scenario);

/// Rewrites the observer-based controller with gains `other` as an operator
/// y_tilde -> u_tilde around the base gains, so the Youla loop with this Q reproduces
/// the closed loop of `other`.
StateSpace linear_controller_as_q(const lti::LtiSystem& sys, const lti::GainPair& base,
                                  const lti::GainPair& other);

}  // namespace yoularen::youla
