#include "yoularen/train.hpp"

#include <cmath>

#include "yoularen/parallel.hpp"
#include "yoularen/random.hpp"

namespace yoularen::train {

AdamState AdamState::make(Eigen::Index n, double lr) {
    AdamState s;
    s.m = Vector::Zero(n);
    s.v = Vector::Zero(n);
    s.lr = lr;
    return s;
}

Vector clip_grad(const Vector& g, double max_norm) {
    const double n = g.norm();
    if (n <= max_norm) return g;
    return g * (max_norm / n);
}

void adam_step(AdamState& s, Vector& theta, const Vector& g) {
    if (theta.size() != g.size() || s.m.size() != g.size())
        throw std::invalid_argument("adam_step: size mismatch");
    ++s.t;
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * g;
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    theta.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

void ArsConfig::validate() const {
    if (m_dirs < 1) throw ConfigError("ARS needs at least one direction");
    if (b_batch < 1) throw ConfigError("ARS batch must be >= 1");
    if (!(nu > 0)) throw ConfigError("ARS perturbation scale must be > 0");
    if (!(sigma_floor > 0)) throw ConfigError("ARS sigma floor must be > 0");
}

std::vector<Vector> ars_directions(Eigen::Index n, long m, std::uint64_t seed) {
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        out.push_back(standard_normal(rng, n));
    }
    return out;
}

namespace {

ArsEstimate combine(const std::vector<Vector>& deltas, std::vector<double> plus,
                    std::vector<double> minus, double nu, double sigma_floor) {
    const std::size_t m = deltas.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += plus[i] + minus[i];
    mean /= static_cast<double>(2 * m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        var += (plus[i] - mean) * (plus[i] - mean) + (minus[i] - mean) * (minus[i] - mean);
    var /= static_cast<double>(2 * m);

    ArsEstimate e;
    e.sigma_r = std::sqrt(var);
    if (!(e.sigma_r >= sigma_floor)) {
        e.sigma_r = 1.0;
        e.sigma_guarded = true;
    }
    e.grad = Vector::Zero(deltas.front().size());
    for (std::size_t i = 0; i < m; ++i)
        e.grad += ((plus[i] - minus[i]) / (2.0 * nu * e.sigma_r)) * deltas[i];
    e.grad /= static_cast<double>(m);
    e.cost_plus = std::move(plus);
    e.cost_minus = std::move(minus);
    return e;
}

}  // namespace

ArsEstimate ars_estimate(const grad::CostFn& cost, const Vector& theta,
                         const std::vector<Vector>& deltas, double nu, double sigma_floor) {
    if (deltas.empty()) throw std::invalid_argument("ars_estimate: no directions");
    const std::size_t m = deltas.size();
    std::vector<double> plus(m), minus(m);
    for (std::size_t i = 0; i < m; ++i) {
        plus[i] = cost(theta + nu * deltas[i]);
        minus[i] = cost(theta - nu * deltas[i]);
    }
    return combine(deltas, std::move(plus), std::move(minus), nu, sigma_floor);
}

namespace {

struct Evaluation {
    double cost = 0.0;
    double max_state = 0.0;
};

Evaluation evaluate(const grad::Problem& prob, const Vector& theta,
                    const std::vector<Scenario>& batch) {
    const auto policy = prob.policy(theta);
    Evaluation e;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        Trajectory tr;
        try {
            tr = rollout::simulate(prob.sys, policy, batch[j]);
        } catch (const NumericalError& err) {
            throw NumericalError(err.what(), err.step(), static_cast<long>(j));
        }
        e.cost += rollout::evaluate_cost(tr, prob.task);
        e.max_state = std::max(e.max_state, rollout::max_state_norm(tr));
    }
    e.cost /= static_cast<double>(batch.size());
    return e;
}

}  // namespace

ArsResult ars_gradient(const grad::Problem& prob, const Vector& theta, const ArsConfig& cfg,
                       const std::vector<Scenario>& batch, std::uint64_t direction_seed) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("ars_gradient: empty batch");
    const auto deltas = ars_directions(theta.size(), cfg.m_dirs, direction_seed);
    const std::size_t m = deltas.size();

    // Index 2i is theta + nu delta_i, 2i+1 is theta - nu delta_i, 2m is theta itself.
    const auto evals = parallel_map(2 * m + 1, [&](std::size_t k) {
        if (k == 2 * m) return evaluate(prob, theta, batch);
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        return evaluate(prob, theta + sign * cfg.nu * deltas[k / 2], batch);
    });

    std::vector<double> plus(m), minus(m);
    ArsResult r;
    for (std::size_t i = 0; i < m; ++i) {
        plus[i] = evals[2 * i].cost;
        minus[i] = evals[2 * i + 1].cost;
        r.perturbed_max_state = std::max(
            {r.perturbed_max_state, evals[2 * i].max_state, evals[2 * i + 1].max_state});
    }
    r.base_cost = evals[2 * m].cost;
    r.base_max_state = evals[2 * m].max_state;
    r.estimate = combine(deltas, std::move(plus), std::move(minus), cfg.nu, cfg.sigma_floor);
    return r;
}

std::string to_string(GradMode m) { return m == GradMode::Exact ? "exact" : "ars"; }

GradMode grad_mode_from_string(const std::string& s) {
    if (s == "exact") return GradMode::Exact;
    if (s == "ars") return GradMode::Ars;
    throw ConfigError("unknown grad_mode '" + s + "' (expected exact|ars)");
}

double Baselines::normalize(double j) const {
    if (kind == rollout::TaskKind::Lqg) return (j - j_opt) / (j_base - j_opt);
    return j / j_base;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (!(clip_norm > 0)) throw ConfigError("clip norm must be > 0");
    if (!(lr_drop_fraction >= 0 && lr_drop_fraction <= 1))
        throw ConfigError("lr drop fraction must lie in [0, 1]");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (mode == GradMode::Ars) ars.validate();
}

long TrainConfig::drop_epoch() const {
    // The small slack keeps e.g. 0.85 * 100 from rounding up to 86.
    return static_cast<long>(std::ceil(lr_drop_fraction * static_cast<double>(epochs) - 1e-9));
}

double TrainConfig::lr_at(long update) const {
    return update < drop_epoch() ? lr : lr * lr_drop_factor;
}

Vector initial_theta(const grad::Problem& prob, const TrainConfig& cfg) {
    return ren::RenTheta::random(prob.dims, cfg.seed, prob.alpha_bar, cfg.out_scale_init,
                                 prob.out_scale)
        .to_flat();
}

TrainRun train_loop(const grad::Problem& prob, const TrainConfig& cfg,
                    const std::vector<Scenario>& test_batch, const Baselines& baselines,
                    std::optional<Vector> theta0, const CheckpointFn& checkpoint) {
    cfg.validate();
    TrainRun run;
    run.config = cfg;
    run.theta = theta0 ? *theta0 : initial_theta(prob, cfg);
    if (run.theta.size() != prob.num_params())
        throw std::invalid_argument("train_loop: initial parameters have the wrong length");
    AdamState adam = AdamState::make(run.theta.size(), cfg.lr);
    const long batch_size = cfg.mode == GradMode::Exact ? cfg.batch : cfg.ars.b_batch;

    for (long epoch = 0; epoch <= cfg.epochs; ++epoch) {
        try {
            const auto batch = rollout::sample_batch(
                prob.sys, prob.task, derive_seed(cfg.seed, {kTrainStream, static_cast<std::uint64_t>(epoch)}),
                static_cast<std::size_t>(batch_size));
            CurvePoint pt;
            pt.epoch = epoch;
            pt.test_cost = grad::batch_cost(prob, run.theta, test_batch);
            pt.normalized_cost = baselines.normalize(pt.test_cost);

            if (epoch == cfg.epochs) {
                pt.train_cost = grad::batch_cost(prob, run.theta, batch);
                run.curve.push_back(pt);
                break;
            }

            Vector g;
            if (cfg.mode == GradMode::Exact) {
                auto cg = grad::grad_exact(prob, run.theta, batch);
                pt.train_cost = cg.cost;
                g = std::move(cg.grad);
            } else {
                auto ars = ars_gradient(prob, run.theta, cfg.ars, batch,
                                        derive_seed(cfg.seed, {kArsStream, static_cast<std::uint64_t>(epoch)}));
                pt.train_cost = ars.base_cost;
                run.search.push_back({epoch, ars.base_max_state, ars.perturbed_max_state});
                g = std::move(ars.estimate.grad);
            }
            if (!std::isfinite(pt.train_cost) || !std::isfinite(pt.test_cost))
                throw NumericalError("non-finite cost");
            run.curve.push_back(pt);

            adam.lr = cfg.lr_at(epoch);
            adam_step(adam, run.theta, clip_grad(g, cfg.clip_norm));
            if (!run.theta.allFinite()) throw NumericalError("non-finite parameters after update");
            if (checkpoint && epoch + 1 == cfg.drop_epoch() && epoch + 1 < cfg.epochs)
                checkpoint(epoch + 1, run.theta);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("epoch ") + std::to_string(epoch) + ": " + e.what(),
                                 e.step(), e.scenario(), epoch);
        }
    }
    if (checkpoint) checkpoint(cfg.epochs, run.theta);
    return run;
}

}  // namespace yoularen::train
