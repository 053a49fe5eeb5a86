#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace yoularen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a simulation or optimization produces a non-finite value.
/// Carries the location where the problem was first detected; -1 means "not applicable".
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, long step = -1, long scenario = -1, long epoch = -1)
        : std::runtime_error(what), step_(step), scenario_(scenario), epoch_(epoch) {}

    long step() const noexcept { return step_; }
    long scenario() const noexcept { return scenario_; }
    long epoch() const noexcept { return epoch_; }

private:
    long step_;
    long scenario_;
    long epoch_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Largest singular value. Matrices in this library are tiny, so a full SVD is affordable.
double spectral_norm(const Matrix& m);

/// Largest eigenvalue modulus of a square matrix. Empty matrices have radius 0.
double spectral_radius(const Matrix& m);

}  // namespace yoularen
