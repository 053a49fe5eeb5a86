#include "yoularen/grad.hpp"

#include <algorithm>
#include <cmath>

#include "yoularen/parallel.hpp"
#include "yoularen/random.hpp"

namespace yoularen::grad {

using rollout::TaskKind;
using youla::Arch;

Problem Problem::make(lti::LtiSystem sys, lti::GainPair gains, Arch arch, rollout::TaskSpec task,
                      long n_chi, long n_v, double alpha_bar, double out_scale) {
    sys.validate();
    task.validate(sys);
    Problem p;
    p.dims = ren::RenDims{n_chi, n_v, sys.ny(), sys.nu()};
    p.dims.validate();
    p.sys = std::move(sys);
    p.gains = std::move(gains);
    p.arch = arch;
    p.task = std::move(task);
    p.alpha_bar = alpha_bar;
    p.out_scale = out_scale;
    return p;
}

youla::Policy Problem::policy(const Vector& theta) const {
    const auto weights = ren::direct_param(ren::RenTheta::from_flat(theta, dims, alpha_bar, out_scale));
    return youla::Policy::make(arch, youla::BaseController::make(sys, gains), weights);
}

namespace {

/// Gradient accumulators shaped like RenWeights.
struct WeightGrad {
    Matrix A, B1, B2, C1, D11, D12, C2, D21, D22;
    Vector b_chi, b_v, b_y;

    explicit WeightGrad(const ren::RenDims& d) {
        const auto z = ren::RenWeights::zeros(d);
        A = z.A; B1 = z.B1; B2 = z.B2; C1 = z.C1; D11 = z.D11; D12 = z.D12;
        C2 = z.C2; D21 = z.D21; D22 = z.D22;
        b_chi = z.b_chi; b_v = z.b_v; b_y = z.b_y;
    }
};

/// Quantities recorded on the forward pass of one rollout.
struct Tape {
    std::vector<Vector> x, xhat, chi, q_in, v, w, u;
};

// Chain rule from explicit weights back to the flat free-parameter vector.
Vector weights_to_theta_grad(const ren::RenTheta& th, const WeightGrad& g) {
    const auto budget = ren::Budgets::for_alpha(th.alpha_bar);
    ren::RenTheta d = ren::RenTheta::zeros(th.dims, th.alpha_bar, th.out_scale);
    d.A_free = ren::smooth_normalize_vjp(th.A_free, budget.a, g.A);
    d.B1_free = ren::smooth_normalize_vjp(th.B1_free, budget.bc, g.B1);
    d.C1_free = ren::smooth_normalize_vjp(th.C1_free, budget.bc, g.C1);
    const Matrix d11 = g.D11.triangularView<Eigen::StrictlyLower>();
    d.D11_free = ren::smooth_normalize_vjp(th.D11_free, budget.d11, d11);
    d.B2 = ren::smooth_normalize_vjp(th.B2, th.out_scale, g.B2);
    d.D12 = ren::smooth_normalize_vjp(th.D12, th.out_scale, g.D12);
    d.C2 = ren::smooth_normalize_vjp(th.C2, th.out_scale, g.C2);
    d.D21 = ren::smooth_normalize_vjp(th.D21, th.out_scale, g.D21);
    d.D22 = ren::smooth_normalize_vjp(th.D22, th.out_scale, g.D22);
    d.b_chi = g.b_chi;
    d.b_v = g.b_v;
    d.b_y = g.b_y;
    return d.to_flat();
}

double forward(const Problem& prob, const ren::RenWeights& w, const Scenario& s, Tape& tape) {
    const auto& sys = prob.sys;
    const auto& task = prob.task;
    const long T = s.horizon();
    tape.x.resize(T + 1);
    tape.xhat.resize(T + 1);
    tape.chi.resize(T + 1);
    tape.q_in.resize(T);
    tape.v.resize(T);
    tape.w.resize(T);
    tape.u.resize(T);

    tape.x[0] = s.x0;
    tape.xhat[0] = Vector::Zero(sys.nx());
    tape.chi[0] = Vector::Zero(w.dims.n_chi);
    double cost = 0.0;
    Vector ut;
    for (long t = 0; t < T; ++t) {
        const Vector& x = tape.x[t];
        const Vector& xh = tape.xhat[t];
        const Vector y = sys.C * x + s.dy.row(t).transpose();
        const Vector ytilde = y - sys.C * xh;
        tape.q_in[t] = prob.arch == Arch::Youla ? ytilde : y;
        ren::ren_forward(w, tape.chi[t], tape.q_in[t], tape.chi[t + 1], ut, &tape.v[t], &tape.w[t]);
        Vector u = -prob.gains.K * xh + ut;
        if (!u.allFinite()) throw NumericalError("grad_exact: non-finite input", t);

        cost += x.dot(task.weights.Q * x) + u.dot(task.weights.R * u);
        if (task.kind == TaskKind::InputConstrained)
            for (Eigen::Index j = 0; j < u.size(); ++j)
                cost += task.rho * std::max(std::abs(u(j)) - task.u_bar, 0.0);

        tape.x[t + 1] = sys.A * x + sys.B * u + s.dx.row(t).transpose();
        tape.xhat[t + 1] = sys.A * xh + sys.B * u + prob.gains.L * ytilde;
        if (!tape.x[t + 1].allFinite()) throw NumericalError("grad_exact: state overflow", t + 1);
        tape.u[t] = std::move(u);
    }
    cost += tape.x[T].dot(task.weights.Qf * tape.x[T]);
    return cost;
}

void backward(const Problem& prob, const ren::RenWeights& w, const Tape& tape, WeightGrad& g) {
    const auto& sys = prob.sys;
    const auto& task = prob.task;
    const auto& K = prob.gains.K;
    const auto& L = prob.gains.L;
    const long T = static_cast<long>(tape.u.size());
    const long nv = w.dims.n_v;

    // Adjoints of the cost with respect to the states at time t+1.
    Vector lam_x = 2.0 * task.weights.Qf * tape.x[T];
    Vector lam_xh = Vector::Zero(sys.nx());
    Vector lam_chi = Vector::Zero(w.dims.n_chi);

    for (long t = T - 1; t >= 0; --t) {
        const Vector& u = tape.u[t];
        const Vector& chi = tape.chi[t];
        const Vector& qin = tape.q_in[t];
        const Vector& act = tape.w[t];
        const Vector& pre = tape.v[t];

        Vector g_u = 2.0 * task.weights.R * u + sys.B.transpose() * (lam_x + lam_xh);
        if (task.kind == TaskKind::InputConstrained) {
            for (Eigen::Index j = 0; j < u.size(); ++j)
                if (std::abs(u(j)) > task.u_bar) g_u(j) += task.rho * (u(j) > 0 ? 1.0 : -1.0);
        }
        const Vector g_ytilde_obs = L.transpose() * lam_xh;

        // Network: chi+ and u_tilde = g_u.
        g.A.noalias() += lam_chi * chi.transpose();
        g.B1.noalias() += lam_chi * act.transpose();
        g.B2.noalias() += lam_chi * qin.transpose();
        g.b_chi += lam_chi;
        g.C2.noalias() += g_u * chi.transpose();
        g.D21.noalias() += g_u * act.transpose();
        g.D22.noalias() += g_u * qin.transpose();
        g.b_y += g_u;

        Vector g_w = w.B1.transpose() * lam_chi + w.D21.transpose() * g_u;
        Vector g_chi = w.A.transpose() * lam_chi + w.C2.transpose() * g_u;
        Vector g_qin = w.B2.transpose() * lam_chi + w.D22.transpose() * g_u;

        // Neurons in reverse index order: v_i = pre_i + sum_{j<i} D11_ij w_j.
        Vector g_v(nv);
        for (long i = nv - 1; i >= 0; --i) {
            g_v(i) = pre(i) > 0.0 ? g_w(i) : 0.0;
            if (i > 0 && g_v(i) != 0.0) {
                g_w.head(i) += g_v(i) * w.D11.row(i).head(i).transpose();
                g.D11.row(i).head(i) += g_v(i) * act.head(i).transpose();
            }
        }
        g.C1.noalias() += g_v * chi.transpose();
        g.D12.noalias() += g_v * qin.transpose();
        g.b_v += g_v;
        g_chi.noalias() += w.C1.transpose() * g_v;
        g_qin.noalias() += w.D12.transpose() * g_v;

        // y = C x + d_y, y_tilde = y - C xhat, u = -K xhat + u_tilde.
        Vector g_ytilde = g_ytilde_obs;
        Vector g_y = Vector::Zero(sys.ny());
        if (prob.arch == Arch::Youla) g_ytilde += g_qin;
        else g_y += g_qin;
        g_y += g_ytilde;

        Vector new_lam_x = 2.0 * task.weights.Q * tape.x[t] + sys.A.transpose() * lam_x +
                           sys.C.transpose() * g_y;
        Vector new_lam_xh = sys.A.transpose() * lam_xh - sys.C.transpose() * g_ytilde -
                            K.transpose() * g_u;
        lam_x.swap(new_lam_x);
        lam_xh.swap(new_lam_xh);
        lam_chi.swap(g_chi);
    }
}

}  // namespace

CostAndGrad grad_exact_single(const Problem& prob, const Vector& theta, const Scenario& s) {
    if (!theta.allFinite()) throw std::invalid_argument("grad_exact: non-finite parameters");
    const auto th = ren::RenTheta::from_flat(theta, prob.dims, prob.alpha_bar, prob.out_scale);
    const auto w = ren::direct_param(th);
    Tape tape;
    CostAndGrad out;
    out.cost = forward(prob, w, s, tape);
    WeightGrad g(prob.dims);
    backward(prob, w, tape, g);
    out.grad = weights_to_theta_grad(th, g);
    if (!out.grad.allFinite()) throw NumericalError("grad_exact: non-finite gradient");
    return out;
}

CostAndGrad grad_exact(const Problem& prob, const Vector& theta,
                       const std::vector<Scenario>& scenarios) {
    if (scenarios.empty()) throw std::invalid_argument("grad_exact: empty batch");
    const auto parts = parallel_map(scenarios.size(), [&](std::size_t i) {
        try {
            return grad_exact_single(prob, theta, scenarios[i]);
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), e.step(), static_cast<long>(i));
        }
    });
    CostAndGrad out;
    out.grad = Vector::Zero(theta.size());
    for (const auto& p : parts) {
        out.cost += p.cost;
        out.grad += p.grad;
    }
    const double n = static_cast<double>(scenarios.size());
    out.cost /= n;
    out.grad /= n;
    return out;
}

double batch_cost(const Problem& prob, const Vector& theta,
                  const std::vector<Scenario>& scenarios) {
    return rollout::batch_cost(prob.sys, prob.policy(theta), scenarios, prob.task);
}

Vector finite_diff_oracle(const CostFn& cost, const Vector& theta, double step,
                          const std::vector<long>& coords) {
    if (!(step > 0)) throw std::invalid_argument("finite_diff_oracle: step must be > 0");
    Vector out(static_cast<Eigen::Index>(coords.size()));
    Vector probe = theta;
    for (std::size_t k = 0; k < coords.size(); ++k) {
        const long i = coords[k];
        probe(i) = theta(i) + step;
        const double up = cost(probe);
        probe(i) = theta(i) - step;
        const double down = cost(probe);
        probe(i) = theta(i);
        out(static_cast<Eigen::Index>(k)) = (up - down) / (2.0 * step);
    }
    return out;
}

Vector finite_diff_oracle(const CostFn& cost, const Vector& theta, double step) {
    std::vector<long> all(static_cast<std::size_t>(theta.size()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<long>(i);
    return finite_diff_oracle(cost, theta, step, all);
}

std::uint64_t activation_signature(const Problem& prob, const Vector& theta,
                                   const std::vector<Scenario>& scenarios) {
    const auto w = ren::direct_param(ren::RenTheta::from_flat(theta, prob.dims, prob.alpha_bar, prob.out_scale));
    std::uint64_t h = 0;
    for (const auto& s : scenarios) {
        Tape tape;
        forward(prob, w, s, tape);
        for (std::size_t t = 0; t < tape.v.size(); ++t) {
            for (Eigen::Index i = 0; i < tape.v[t].size(); ++i)
                h = mix64(h ^ (tape.v[t](i) > 0.0 ? 0x5bd1e995ULL : 0x1b873593ULL));
            if (prob.task.kind == TaskKind::InputConstrained)
                for (Eigen::Index j = 0; j < tape.u[t].size(); ++j) {
                    const double u = tape.u[t](j);
                    h = mix64(h ^ (u > prob.task.u_bar ? 1u : u < -prob.task.u_bar ? 2u : 3u));
                }
        }
    }
    return h;
}

OracleReport oracle_check(const Problem& prob, const Vector& theta,
                          const std::vector<Scenario>& scenarios, long count, std::uint64_t seed,
                          double step) {
    const auto exact = grad_exact(prob, theta, scenarios);
    const CostFn cost = [&](const Vector& t) { return batch_cost(prob, t, scenarios); };
    Rng rng(seed);
    std::uniform_int_distribution<long> pick(0, prob.num_params() - 1);
    OracleReport rep;
    std::vector<double> errors;
    while (static_cast<long>(errors.size()) < count && rep.skipped < 50 * count) {
        const long i = pick(rng);
        Vector plus = theta, minus = theta;
        plus(i) += step;
        minus(i) -= step;
        if (activation_signature(prob, plus, scenarios) !=
            activation_signature(prob, minus, scenarios)) {
            ++rep.skipped;
            continue;
        }
        const double fd = finite_diff_oracle(cost, theta, step, {i})(0);
        const double ex = exact.grad(i);
        errors.push_back(std::abs(ex - fd) / std::max({std::abs(ex), std::abs(fd), 1e-12}));
    }
    rep.coordinates = static_cast<long>(errors.size());
    if (errors.empty()) {
        rep.median_relative_error = rep.max_relative_error = INFINITY;
        return rep;
    }
    rep.max_relative_error = *std::max_element(errors.begin(), errors.end());
    // Upper median, so an even count never averages away a bad coordinate.
    std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
    rep.median_relative_error = errors[errors.size() / 2];
    return rep;
}

}  // namespace yoularen::grad
