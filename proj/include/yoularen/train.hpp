#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "yoularen/grad.hpp"

namespace yoularen::train {

/// Bias-corrected Adam.
struct AdamState {
    Vector m;
    Vector v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 0.01;

    static AdamState make(Eigen::Index n, double lr);
};

/// Rescales g onto the ball of radius max_norm if it lies outside.
Vector clip_grad(const Vector& g, double max_norm = 10.0);

/// Advances the moments and applies the update to theta in place.
void adam_step(AdamState& state, Vector& theta, const Vector& g);

struct ArsConfig {
    long m_dirs = 40;
    long b_batch = 10;
    double nu = 0.01;
    double sigma_floor = 1e-8;

    void validate() const;
};

struct ArsEstimate {
    Vector grad;
    std::vector<double> cost_plus;
    std::vector<double> cost_minus;
    double sigma_r = 1.0;
    bool sigma_guarded = false;
};

/// Gaussian perturbation directions for one ARS step.
std::vector<Vector> ars_directions(Eigen::Index n, long m, std::uint64_t seed);

/// Random-search gradient from paired evaluations at theta +- nu delta_i:
///   (1/m) sum_i (J+_i - J-_i) / (2 nu sigma_R) delta_i,
/// with sigma_R the population standard deviation of the 2m costs (1 if below sigma_floor).
ArsEstimate ars_estimate(const grad::CostFn& cost, const Vector& theta,
                         const std::vector<Vector>& deltas, double nu, double sigma_floor);

struct ArsResult {
    ArsEstimate estimate;
    double base_cost = 0.0;
    double base_max_state = 0.0;       // max_t |x_t| over the batch at theta
    double perturbed_max_state = 0.0;  // same, over every perturbed rollout
};

/// ARS step on the problem's batch cost. All 2m evaluations (and the unperturbed one)
/// share `batch`; only costs enter the estimate.
ArsResult ars_gradient(const grad::Problem& prob, const Vector& theta, const ArsConfig& cfg,
                       const std::vector<Scenario>& batch, std::uint64_t direction_seed);

enum class GradMode { Exact, Ars };

std::string to_string(GradMode m);
GradMode grad_mode_from_string(const std::string& s);

/// Test-batch reference costs used to normalize learning curves.
struct Baselines {
    rollout::TaskKind kind = rollout::TaskKind::Lqg;
    double j_base = 1.0;
    double j_opt = 0.0;

    /// LQG task: (J - J_opt) / (J_base - J_opt). Constrained task: J / J_base.
    double normalize(double j) const;
};

struct TrainConfig {
    long epochs = 100;
    double lr = 0.01;
    double clip_norm = 10.0;
    double lr_drop_fraction = 0.85;
    double lr_drop_factor = 0.1;
    long batch = 40;
    std::uint64_t seed = 0;
    GradMode mode = GradMode::Exact;
    ArsConfig ars;
    double out_scale_init = 0.01;  // initial output gain, see RenTheta::random

    void validate() const;
    /// First update index that uses the reduced learning rate: ceil(fraction * epochs).
    long drop_epoch() const;
    double lr_at(long update) const;
};

struct CurvePoint {
    long epoch = 0;
    double train_cost = 0.0;
    double test_cost = 0.0;
    double normalized_cost = 0.0;
};

/// Per-epoch stability record of the random search.
struct SearchRecord {
    long epoch = 0;
    double base_max_state = 0.0;
    double perturbed_max_state = 0.0;
};

struct TrainRun {
    TrainConfig config;
    std::vector<CurvePoint> curve;  // epochs + 1 entries
    Vector theta;
    std::vector<SearchRecord> search;  // ARS mode only
};

/// Called with (epoch, theta) at the learning-rate drop and after the last update.
using CheckpointFn = std::function<void(long, const Vector&)>;

/// Initial parameters for a run: RenTheta::random with the run's seed.
Vector initial_theta(const grad::Problem& prob, const TrainConfig& cfg);

/// Epoch loop. Row e of the curve is evaluated at the parameters after e updates;
/// its train cost is taken on the batch used for update e (a fresh batch each epoch).
TrainRun train_loop(const grad::Problem& prob, const TrainConfig& cfg,
                    const std::vector<Scenario>& test_batch, const Baselines& baselines,
                    std::optional<Vector> theta0 = std::nullopt,
                    const CheckpointFn& checkpoint = {});

}  // namespace yoularen::train
