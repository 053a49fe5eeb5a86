#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "yoularen/toml_lite.hpp"
#include "yoularen/train.hpp"

namespace yoularen::experiment {

enum class Model { Ren, Lben };

std::string to_string(Model m);
Model model_from_string(const std::string& s);

/// Learning rates of the published runs, per task, structure, model and gradient mode.
double default_learning_rate(rollout::TaskKind task, youla::Arch arch, Model model,
                             train::GradMode mode);

struct ExperimentConfig {
    rollout::TaskKind task = rollout::TaskKind::Lqg;
    youla::Arch arch = youla::Arch::Youla;
    Model model = Model::Ren;
    train::GradMode grad_mode = train::GradMode::Exact;
    long n_chi = 10;
    long n_v = 20;
    std::optional<double> lr;  // default_learning_rate when unset
    long epochs = 100;
    long batch = 40;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::string output_dir = "out";

    double alpha_bar = 0.95;
    double out_scale = ren::kDefaultOutScale;  // norm bound of B2, D12, C2, D21, D22
    double out_scale_init = 0.01;              // initial output gain
    double clip_norm = 10.0;
    double lr_drop_fraction = 0.85;
    double lr_drop_factor = 0.1;
    train::ArsConfig ars;

    // Task and scenario conventions.
    std::optional<long> horizon;  // 50 / 100 by task when unset
    double rho = 400.0;
    double u_bar = 2.0;
    double noise_scale = 1.0;  // multiplies Sigma_x and Sigma_y
    rollout::DisturbanceParams disturbance;
    long test_batch = 100;
    std::uint64_t test_seed = 20220401;
    std::uint64_t base_seed = 0;  // seeds the randomly tuned base controller

    void validate() const;
    double effective_lr() const;
    long effective_n_chi() const { return model == Model::Lben ? 0 : n_chi; }
    train::TrainConfig train_config(std::uint64_t seed) const;
    rollout::TaskSpec task_spec() const;
};

/// Reads every recognised key; unknown keys raise ConfigError.
ExperimentConfig config_from_toml(const toml_lite::Document& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one "key=value" override using the same key names as the config file.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Plant, task, base controller, test batch and reference costs shared by all commands.
struct Setup {
    lti::LtiSystem sys;
    rollout::TaskSpec task;
    lti::GainPair base_gains;
    lti::FiniteHorizonLqg optimal;
    std::vector<Scenario> test_batch;
    train::Baselines baselines;
};

Setup build_setup(const ExperimentConfig& cfg);

grad::Problem make_problem(const ExperimentConfig& cfg, const Setup& setup);

/// Writes plant.json, base_controller.json, optimal_policy.json, baselines.json and
/// test_scenarios.jsonl under `dir`.
Setup cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& dir);

struct SeedResult {
    std::uint64_t seed = 0;
    train::TrainRun run;
};

/// One directory per seed (curve.csv, checkpoint.json, search.csv for random search)
/// plus summary.csv with the per-epoch mean, min and max normalized test cost.
std::vector<SeedResult> cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& dir);

/// Per-epoch mean/min/max over the normalized costs of several curves of equal length.
struct SummaryRow {
    long epoch = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<std::vector<train::CurvePoint>>& curves);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

struct EvalResult {
    double cost = 0.0;
    double normalized = 0.0;
    double j_base = 0.0;
    double j_opt = 0.0;
};

/// Test-batch cost of a stored policy snapshot.
EvalResult cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& policy_file);

struct CheckEntry {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    std::string comparison;  // "<=" or "<" or ">="
    bool pass = false;
};

struct VerifyReport {
    std::vector<CheckEntry> entries;
    bool all_pass() const;
    nlohmann::json to_json() const;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    int ren_samples = 200;
    int superposition_samples = 20;
    int stability_samples = 20;
    /// Replaces the smooth normalizer inside the parameterization (fault injection).
    ren::Normalizer normalizer = ren::smooth_normalize;
};

VerifyReport cmd_verify(const ExperimentConfig& cfg, const VerifyOptions& opts);

}  // namespace yoularen::experiment
