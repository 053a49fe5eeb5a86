#pragma once

#include <cstdint>
#include <vector>

#include "yoularen/lti.hpp"
#include "yoularen/scenario.hpp"
#include "yoularen/youla.hpp"

namespace yoularen::rollout {

enum class TaskKind { Lqg, InputConstrained };

std::string to_string(TaskKind k);
TaskKind task_from_string(const std::string& s);

/// Sampling conventions for the initial state and the piecewise-constant input
/// disturbance of the input-constrained task.
struct DisturbanceParams {
    double x0_std = 0.1;
    long segment_min = 10;      // steps, inclusive
    long segment_max = 30;      // steps, inclusive
    double segment_magnitude = 5.0;  // uniform in [-m, m]
    double input_noise_std = 0.1;
};

struct TaskSpec {
    TaskKind kind = TaskKind::Lqg;
    lti::CostWeights weights;
    lti::NoiseCov noise;
    long T = 50;
    double rho = 0.0;
    double u_bar = 1.0;
    DisturbanceParams disturbance;

    void validate(const lti::LtiSystem& sys) const;
};

/// Cart-pole tasks: Q = Qf = diag(1,1,5,1), R = 1, Sigma_x = 0.005 I, Sigma_y = 0.001 I;
/// T = 50 for the LQG task, T = 100 with rho = 400 and u_bar = 2 for the constrained one.
TaskSpec cartpole_task(TaskKind kind);

/// Draws x0 ~ N(0, x0_std^2 I), d_x ~ N(0, Sigma_x), d_y ~ N(0, Sigma_y) per step. The
/// constrained task adds B (w_g + w_s) to d_x, with w_g white Gaussian and w_s piecewise
/// constant over random-length segments.
Scenario sample_scenario(const lti::LtiSystem& sys, const TaskSpec& task, std::uint64_t seed);

/// Scenarios with seeds derive_seed(batch_seed, {i}), i = 0..n-1.
std::vector<Scenario> sample_batch(const lti::LtiSystem& sys, const TaskSpec& task,
                                   std::uint64_t batch_seed, std::size_t n);

/// Closed-loop rollout. The policy is copied and reset, so the call is pure.
/// Throws NumericalError carrying the step index on overflow.
Trajectory simulate(const lti::LtiSystem& sys, const youla::Policy& policy, const Scenario& s);

/// Quadratic cost plus rho * sum_t sum_j max(|u_tj| - u_bar, 0) for the constrained task.
double evaluate_cost(const Trajectory& traj, const TaskSpec& task);

/// Mean cost over the batch. Scenarios may run in parallel; the reduction is in index order.
double batch_cost(const lti::LtiSystem& sys, const youla::Policy& policy,
                  const std::vector<Scenario>& scenarios, const TaskSpec& task);

/// max_t |x_t|.
double max_state_norm(const Trajectory& traj);

/// Rollout with u = 0.
Trajectory simulate_open_loop(const lti::LtiSystem& sys, const Scenario& s);

/// Two closed loops driven by the disturbances of `s` from different joint states
/// (x; xhat; chi), stacked in that order. The ratio compares the joint-state distance
/// after the last step with the initial one.
struct ContractionProbe {
    double initial_distance = 0.0;
    double final_distance = 0.0;
    double ratio = 0.0;
    double max_state = 0.0;  // max_t |x_t| over both rollouts
};

ContractionProbe contraction_probe(const lti::LtiSystem& sys, const youla::Policy& policy,
                                   const Scenario& s, const Vector& joint_a,
                                   const Vector& joint_b);

/// Rollout of the time-varying LQG policy (the optimal baseline for the LQG task).
Trajectory simulate_finite_horizon(const lti::LtiSystem& sys, const lti::FiniteHorizonLqg& lqg,
                                   const Scenario& s);

double batch_cost_finite_horizon(const lti::LtiSystem& sys, const lti::FiniteHorizonLqg& lqg,
                                 const std::vector<Scenario>& scenarios, const TaskSpec& task);

}  // namespace yoularen::rollout
