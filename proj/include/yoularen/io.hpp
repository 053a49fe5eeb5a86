#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "yoularen/lti.hpp"
#include "yoularen/ren.hpp"
#include "yoularen/scenario.hpp"
#include "yoularen/train.hpp"
#include "yoularen/youla.hpp"

namespace yoularen::io {

using Json = nlohmann::json;

/// Row-major nested arrays. A vector is a flat array.
Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j, const std::string& what);
Vector vector_from_json(const Json& j, const std::string& what);

/// Plant/weights/noise document with keys A, B, C, Q, R, Qf, Sigma_x, Sigma_y.
/// Missing keys are simply not present in the parsed result.
struct LtiDocument {
    lti::LtiSystem sys;
    std::optional<lti::CostWeights> weights;
    std::optional<lti::NoiseCov> noise;
};

Json lti_to_json(const lti::LtiSystem& sys, const lti::CostWeights* w = nullptr,
                 const lti::NoiseCov* n = nullptr);
LtiDocument lti_from_json(const Json& j);

/// Hex digest of the plant matrices; ties stored controllers to the plant they were built for.
std::string system_hash(const lti::LtiSystem& sys);

/// {"dims", "theta", "alpha_bar", "out_scale", "sigma": "relu"}. Explicit weights
/// are never stored.
Json theta_to_json(const ren::RenTheta& theta);
ren::RenTheta theta_from_json(const Json& j);

/// Base controller: gains plus the plant hash and the design it came from.
Json base_controller_to_json(const lti::LtiSystem& sys, const lti::GainPair& gains);
lti::GainPair base_gains_from_json(const Json& j, const lti::LtiSystem& sys);

/// Base controller + "arch" + network parameters.
Json policy_to_json(const lti::LtiSystem& sys, const lti::GainPair& gains, youla::Arch arch,
                    const ren::RenTheta& theta);

struct PolicySnapshot {
    lti::GainPair gains;
    youla::Arch arch;
    ren::RenTheta theta;
};
PolicySnapshot policy_from_json(const Json& j, const lti::LtiSystem& sys);

Json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j);

/// One scenario per line.
void write_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& batch);
std::vector<Scenario> read_scenarios(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double x);

/// Header "epoch,train_cost,test_cost,normalized_cost".
std::string curve_to_csv(const std::vector<train::CurvePoint>& curve);
/// Throws std::runtime_error naming `source` and the line on malformed input.
std::vector<train::CurvePoint> curve_from_csv(const std::string& text, const std::string& source);
std::vector<train::CurvePoint> read_curve(const std::filesystem::path& path);

/// Write to a sibling temporary file, then rename over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace yoularen::io
