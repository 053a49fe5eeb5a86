#include "yoularen/rollout.hpp"

#include <cmath>
#include <random>

#include "yoularen/parallel.hpp"
#include "yoularen/random.hpp"

namespace yoularen::rollout {

std::string to_string(TaskKind k) { return k == TaskKind::Lqg ? "lqg" : "constrained"; }

TaskKind task_from_string(const std::string& s) {
    if (s == "lqg") return TaskKind::Lqg;
    if (s == "constrained") return TaskKind::InputConstrained;
    throw ConfigError("unknown task '" + s + "' (expected lqg|constrained)");
}

void TaskSpec::validate(const lti::LtiSystem& sys) const {
    auto square = [](const Matrix& m, Eigen::Index n) { return m.rows() == n && m.cols() == n; };
    if (!square(weights.Q, sys.nx()) || !square(weights.Qf, sys.nx()) ||
        !square(weights.R, sys.nu()) || !square(noise.sigma_x, sys.nx()) ||
        !square(noise.sigma_y, sys.ny()))
        throw ConfigError("task weights/covariances do not match the plant dimensions");
    if (T < 1) throw ConfigError("task horizon must be >= 1");
    if (rho < 0) throw ConfigError("rho must be >= 0");
    if (kind == TaskKind::InputConstrained && !(u_bar > 0))
        throw ConfigError("u_bar must be > 0 for the constrained task");
    const auto& d = disturbance;
    if (d.x0_std < 0 || d.input_noise_std < 0 || d.segment_magnitude < 0 || d.segment_min < 1 ||
        d.segment_max < d.segment_min)
        throw ConfigError("invalid disturbance parameters");
}

TaskSpec cartpole_task(TaskKind kind) {
    TaskSpec t;
    t.kind = kind;
    t.weights.Q = Vector((Vector(4) << 1, 1, 5, 1).finished()).asDiagonal();
    t.weights.Qf = t.weights.Q;
    t.weights.R = Matrix::Identity(1, 1);
    t.noise.sigma_x = 0.005 * Matrix::Identity(4, 4);
    t.noise.sigma_y = 0.001 * Matrix::Identity(2, 2);
    if (kind == TaskKind::Lqg) {
        t.T = 50;
    } else {
        t.T = 100;
        t.rho = 400.0;
        t.u_bar = 2.0;
    }
    return t;
}

namespace {

// Square-root factor S with S S' = cov; falls back to an eigen factor for singular covariances.
Matrix covariance_factor(const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

}  // namespace

Scenario sample_scenario(const lti::LtiSystem& sys, const TaskSpec& task, std::uint64_t seed) {
    const long T = task.T;
    const Eigen::Index nx = sys.nx(), ny = sys.ny(), nu = sys.nu();
    Rng rng(seed);
    Scenario s;
    s.seed = seed;
    s.x0 = task.disturbance.x0_std * standard_normal(rng, nx);

    const Matrix sx = covariance_factor(task.noise.sigma_x);
    const Matrix sy = covariance_factor(task.noise.sigma_y);
    s.dx.resize(T, nx);
    s.dy.resize(T, ny);
    for (long t = 0; t < T; ++t) {
        s.dx.row(t) = (sx * standard_normal(rng, nx)).transpose();
        s.dy.row(t) = (sy * standard_normal(rng, ny)).transpose();
    }

    if (task.kind == TaskKind::InputConstrained) {
        const auto& dp = task.disturbance;
        Matrix w = dp.input_noise_std * standard_normal(rng, T, nu);
        std::uniform_int_distribution<long> duration(dp.segment_min, dp.segment_max);
        std::uniform_real_distribution<double> magnitude(-dp.segment_magnitude, dp.segment_magnitude);
        for (Eigen::Index j = 0; j < nu; ++j) {
            long t = 0;
            while (t < T) {
                const long len = duration(rng);
                const double level = magnitude(rng);
                for (long k = t; k < std::min(T, t + len); ++k) w(k, j) += level;
                t += len;
            }
        }
        s.dx += w * sys.B.transpose();
    }
    return s;
}

std::vector<Scenario> sample_batch(const lti::LtiSystem& sys, const TaskSpec& task,
                                   std::uint64_t batch_seed, std::size_t n) {
    std::vector<Scenario> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(sample_scenario(sys, task, derive_seed(batch_seed, {i})));
    return out;
}

Trajectory simulate(const lti::LtiSystem& sys, const youla::Policy& policy, const Scenario& s) {
    const long T = s.horizon();
    const Eigen::Index nx = sys.nx(), nu = sys.nu(), ny = sys.ny();
    if (s.x0.size() != nx || s.dx.cols() != nx || s.dy.cols() != ny || s.dy.rows() != T)
        throw std::invalid_argument("simulate: scenario does not match the plant");
    youla::Policy p = policy;
    p.reset();

    Trajectory tr;
    tr.x.resize(T + 1, nx);
    tr.u.resize(T, nu);
    tr.y.resize(T, ny);
    tr.z.resize(T, nx + nu);
    Vector x = s.x0;
    tr.x.row(0) = x.transpose();
    for (long t = 0; t < T; ++t) {
        const Vector y = sys.C * x + s.dy.row(t).transpose();
        const Vector u = youla::policy_advance(p, y);
        if (!u.allFinite()) throw NumericalError("simulate: non-finite input", t);
        tr.y.row(t) = y.transpose();
        tr.u.row(t) = u.transpose();
        tr.z.row(t) << x.transpose(), u.transpose();
        x = sys.A * x + sys.B * u + s.dx.row(t).transpose();
        if (!x.allFinite()) throw NumericalError("simulate: state overflow", t + 1);
        tr.x.row(t + 1) = x.transpose();
    }
    return tr;
}

Trajectory simulate_open_loop(const lti::LtiSystem& sys, const Scenario& s) {
    const long T = s.horizon();
    Trajectory tr;
    tr.x.resize(T + 1, sys.nx());
    tr.u = Matrix::Zero(T, sys.nu());
    tr.y.resize(T, sys.ny());
    tr.z.resize(T, sys.nx() + sys.nu());
    Vector x = s.x0;
    tr.x.row(0) = x.transpose();
    for (long t = 0; t < T; ++t) {
        tr.y.row(t) = (sys.C * x + s.dy.row(t).transpose()).transpose();
        tr.z.row(t) << x.transpose(), Vector::Zero(sys.nu()).transpose();
        x = sys.A * x + s.dx.row(t).transpose();
        tr.x.row(t + 1) = x.transpose();
    }
    return tr;
}

ContractionProbe contraction_probe(const lti::LtiSystem& sys, const youla::Policy& policy,
                                   const Scenario& s, const Vector& joint_a,
                                   const Vector& joint_b) {
    const Eigen::Index nx = sys.nx(), nchi = policy.q.dims.n_chi;
    const Eigen::Index n = 2 * nx + nchi;
    if (joint_a.size() != n || joint_b.size() != n)
        throw std::invalid_argument("contraction_probe: joint state has the wrong length");

    struct Loop {
        Vector x;
        youla::Policy p;
    };
    auto start = [&](const Vector& j) {
        Loop l{j.head(nx), policy};
        l.p.base.xhat = j.segment(nx, nx);
        l.p.q_state.chi = j.tail(nchi);
        return l;
    };
    auto joint = [&](const Loop& l) {
        Vector j(n);
        j << l.x, l.p.base.xhat, l.p.q_state.chi;
        return j;
    };

    Loop a = start(joint_a), b = start(joint_b);
    ContractionProbe out;
    out.initial_distance = (joint_a - joint_b).norm();
    out.max_state = std::max(joint_a.head(nx).norm(), joint_b.head(nx).norm());
    for (long t = 0; t < s.horizon(); ++t) {
        for (Loop* l : {&a, &b}) {
            const Vector y = sys.C * l->x + s.dy.row(t).transpose();
            const Vector u = youla::policy_advance(l->p, y);
            l->x = sys.A * l->x + sys.B * u + s.dx.row(t).transpose();
            if (!l->x.allFinite()) throw NumericalError("contraction_probe: state overflow", t + 1);
            out.max_state = std::max(out.max_state, l->x.norm());
        }
    }
    out.final_distance = (joint(a) - joint(b)).norm();
    out.ratio = out.initial_distance > 0.0 ? out.final_distance / out.initial_distance : 0.0;
    return out;
}

double evaluate_cost(const Trajectory& traj, const TaskSpec& task) {
    const long T = traj.u.rows();
    const auto& w = task.weights;
    double cost = 0.0;
    for (long t = 0; t < T; ++t) {
        const auto x = traj.x.row(t);
        const auto u = traj.u.row(t);
        cost += (x * w.Q * x.transpose()).value();
        cost += (u * w.R * u.transpose()).value();
        if (task.kind == TaskKind::InputConstrained) {
            for (Eigen::Index j = 0; j < u.size(); ++j)
                cost += task.rho * std::max(std::abs(u(j)) - task.u_bar, 0.0);
        }
    }
    const auto xT = traj.x.row(T);
    cost += (xT * w.Qf * xT.transpose()).value();
    return cost;
}

namespace {

template <class CostOf>
double ordered_mean(std::size_t n, CostOf&& cost_of) {
    if (n == 0) throw std::invalid_argument("batch cost of an empty batch");
    const std::vector<double> costs = parallel_map(n, [&](std::size_t i) {
        try {
            return cost_of(i);
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), e.step(), static_cast<long>(i));
        }
    });
    double sum = 0.0;
    for (double c : costs) sum += c;
    return sum / static_cast<double>(n);
}

}  // namespace

double batch_cost(const lti::LtiSystem& sys, const youla::Policy& policy,
                  const std::vector<Scenario>& scenarios, const TaskSpec& task) {
    return ordered_mean(scenarios.size(), [&](std::size_t i) {
        return evaluate_cost(simulate(sys, policy, scenarios[i]), task);
    });
}

double max_state_norm(const Trajectory& traj) {
    double m = 0.0;
    for (Eigen::Index t = 0; t < traj.x.rows(); ++t) m = std::max(m, traj.x.row(t).norm());
    return m;
}

Trajectory simulate_finite_horizon(const lti::LtiSystem& sys, const lti::FiniteHorizonLqg& lqg,
                                   const Scenario& s) {
    const long T = s.horizon();
    if (static_cast<long>(lqg.horizon()) < T)
        throw std::invalid_argument("simulate_finite_horizon: policy horizon shorter than scenario");
    const Eigen::Index nx = sys.nx(), nu = sys.nu(), ny = sys.ny();
    Trajectory tr;
    tr.x.resize(T + 1, nx);
    tr.u.resize(T, nu);
    tr.y.resize(T, ny);
    tr.z.resize(T, nx + nu);
    Vector x = s.x0;
    Vector xp = Vector::Zero(nx);
    tr.x.row(0) = x.transpose();
    for (long t = 0; t < T; ++t) {
        const Vector y = sys.C * x + s.dy.row(t).transpose();
        const Vector xf = xp + lqg.M[t] * (y - sys.C * xp);
        const Vector u = -lqg.K[t] * xf;
        xp = sys.A * xf + sys.B * u;
        tr.y.row(t) = y.transpose();
        tr.u.row(t) = u.transpose();
        tr.z.row(t) << x.transpose(), u.transpose();
        x = sys.A * x + sys.B * u + s.dx.row(t).transpose();
        if (!x.allFinite()) throw NumericalError("simulate_finite_horizon: state overflow", t + 1);
        tr.x.row(t + 1) = x.transpose();
    }
    return tr;
}

double batch_cost_finite_horizon(const lti::LtiSystem& sys, const lti::FiniteHorizonLqg& lqg,
                                 const std::vector<Scenario>& scenarios, const TaskSpec& task) {
    return ordered_mean(scenarios.size(), [&](std::size_t i) {
        return evaluate_cost(simulate_finite_horizon(sys, lqg, scenarios[i]), task);
    });
}

}  // namespace yoularen::rollout
