#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "yoularen/rollout.hpp"

namespace yoularen::grad {

/// Everything that stays fixed while the network parameters are trained.
struct Problem {
    lti::LtiSystem sys;
    lti::GainPair gains;
    youla::Arch arch = youla::Arch::Youla;
    rollout::TaskSpec task;
    ren::RenDims dims;
    double alpha_bar = 0.95;
    double out_scale = ren::kDefaultOutScale;

    /// Network dimensions implied by the plant: n_in = n_y, n_out = n_u.
    static Problem make(lti::LtiSystem sys, lti::GainPair gains, youla::Arch arch,
                        rollout::TaskSpec task, long n_chi, long n_v, double alpha_bar = 0.95,
                        double out_scale = ren::kDefaultOutScale);

    long num_params() const { return dims.num_params(); }
    youla::Policy policy(const Vector& theta) const;
};

struct CostAndGrad {
    double cost = 0.0;
    Vector grad;
};

/// Mean batch cost and its exact gradient with respect to the flat parameter
/// vector, by a reverse sweep through the cost, plant, observer, network and
/// parameterization. ReLU and the input-bound hinge use a zero derivative at their kinks.
CostAndGrad grad_exact(const Problem& prob, const Vector& theta,
                       const std::vector<Scenario>& scenarios);

/// Per-scenario version of grad_exact (no batch averaging).
CostAndGrad grad_exact_single(const Problem& prob, const Vector& theta, const Scenario& s);

/// Batch cost through the rollout module (independent of the adjoint code path).
double batch_cost(const Problem& prob, const Vector& theta,
                  const std::vector<Scenario>& scenarios);

using CostFn = std::function<double(const Vector&)>;

/// Central differences (J(theta + h e_i) - J(theta - h e_i)) / 2h for every coordinate.
Vector finite_diff_oracle(const CostFn& cost, const Vector& theta, double step);

/// Same, restricted to `coords`; entry k of the result belongs to coords[k].
Vector finite_diff_oracle(const CostFn& cost, const Vector& theta, double step,
                          const std::vector<long>& coords);

/// Hash of the on/off pattern of every ReLU (and hinge, for the constrained task) over
/// the batch. Equal signatures at theta +- h mean no kink lies between them.
std::uint64_t activation_signature(const Problem& prob, const Vector& theta,
                                   const std::vector<Scenario>& scenarios);

struct OracleReport {
    double median_relative_error = 0.0;
    double max_relative_error = 0.0;
    long coordinates = 0;  // compared
    long skipped = 0;      // rejected because a kink lies within +- step
};

/// Compares grad_exact with central differences on `count` random coordinates drawn
/// with `seed`, skipping coordinates whose activation signature differs at theta +- step.
/// Relative error is |a - b| / max(|a|, |b|, 1e-12).
OracleReport oracle_check(const Problem& prob, const Vector& theta,
                          const std::vector<Scenario>& scenarios, long count, std::uint64_t seed,
                          double step);

}  // namespace yoularen::grad
