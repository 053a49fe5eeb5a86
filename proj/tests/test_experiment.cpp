#include <doctest.h>

#include <filesystem>

#include "yoularen/experiment.hpp"
#include "yoularen/io.hpp"

using namespace yoularen;
using namespace yoularen::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("yoularen_test_exp_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig quick_config() {
    ExperimentConfig c;
    c.n_chi = 3;
    c.n_v = 4;
    c.epochs = 2;
    c.batch = 4;
    c.seeds = {0, 1};
    c.horizon = 20;
    c.test_batch = 6;
    return c;
}

VerifyOptions quick_verify() {
    VerifyOptions o;
    o.ren_samples = 20;
    o.superposition_samples = 4;
    o.stability_samples = 4;
    return o;
}

const CheckEntry& entry(const VerifyReport& r, const std::string& name) {
    for (const auto& e : r.entries)
        if (e.name == name) return e;
    throw std::runtime_error("no check named " + name);
}

}  // namespace

TEST_CASE("published learning rates") {
    using rollout::TaskKind;
    using train::GradMode;
    using youla::Arch;
    CHECK(default_learning_rate(TaskKind::Lqg, Arch::Youla, Model::Ren, GradMode::Exact) == 0.01);
    CHECK(default_learning_rate(TaskKind::Lqg, Arch::Feedback, Model::Ren, GradMode::Exact) == 0.001);
    CHECK(default_learning_rate(TaskKind::Lqg, Arch::Youla, Model::Lben, GradMode::Ars) == 0.01);
    CHECK(default_learning_rate(TaskKind::InputConstrained, Arch::Youla, Model::Ren, GradMode::Ars) == 0.02);
    CHECK(default_learning_rate(TaskKind::Lqg, Arch::Feedback, Model::Ren, GradMode::Ars) == 0.008);
    CHECK(default_learning_rate(TaskKind::InputConstrained, Arch::Feedback, Model::Lben, GradMode::Ars) == 0.01);
}

TEST_CASE("config from toml") {
    const auto doc = toml_lite::parse(R"(
task = "constrained"
arch = "feedback"
model = "lben"
grad_mode = "ars"
epochs = 7
seeds = [4, 5]
u_bar = 1.5
[ars]
m_dirs = 8
[disturbance]
segment_min = 5
)");
    const auto c = config_from_toml(doc);
    CHECK(c.task == rollout::TaskKind::InputConstrained);
    CHECK(c.arch == youla::Arch::Feedback);
    CHECK(c.model == Model::Lben);
    CHECK(c.effective_n_chi() == 0);
    CHECK(c.epochs == 7);
    CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(c.ars.m_dirs == 8);
    CHECK(c.disturbance.segment_min == 5);
    CHECK(c.effective_lr() == 0.01);
    CHECK(c.task_spec().u_bar == 1.5);
    CHECK(c.task_spec().T == 100);

    CHECK_THROWS_AS(config_from_toml(toml_lite::parse("epoch = 3\n")), ConfigError);
    CHECK_THROWS_AS(config_from_toml(toml_lite::parse("task = \"cartpole\"\n")), ConfigError);
    CHECK_THROWS_AS(config_from_toml(toml_lite::parse("epochs = \"ten\"\n")), ConfigError);
    CHECK_THROWS_AS(config_from_toml(toml_lite::parse("lr = -1\n")), ConfigError);
    CHECK_THROWS_AS(config_from_toml(toml_lite::parse("alpha_bar = 1.0\n")), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("overrides") {
    ExperimentConfig c;
    apply_override(c, "task=constrained");
    apply_override(c, "ars.nu=0.02");
    apply_override(c, "seeds=[3]");
    apply_override(c, "lr=5e-3");
    apply_override(c, "output_dir=\"runs/a\"");
    CHECK(c.task == rollout::TaskKind::InputConstrained);
    CHECK(c.ars.nu == 0.02);
    CHECK(c.seeds == std::vector<std::uint64_t>{3});
    CHECK(c.effective_lr() == 5e-3);
    CHECK(c.output_dir == "runs/a");
    CHECK_THROWS_AS(apply_override(c, "no_equals"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "bogus=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "epochs=many"), ConfigError);
    const auto j = config_to_json(c);
    CHECK(j["task"] == "constrained");
    CHECK(j["lr"] == 5e-3);
}

TEST_CASE("synth") {
    SUBCASE("optimal beats base on the lqg task, deterministically") {
        const auto dir = scratch_dir("synth_a");
        const auto again = scratch_dir("synth_b");
        ExperimentConfig c;
        c.test_batch = 20;
        const auto s = cmd_synth(c, dir);
        cmd_synth(c, again);
        CHECK(s.baselines.j_opt <= s.baselines.j_base);
        CHECK(s.baselines.j_opt > 0.0);
        for (const char* f : {"plant.json", "base_controller.json", "optimal_policy.json",
                              "baselines.json", "test_scenarios.jsonl"}) {
            REQUIRE(fs::exists(dir / f));
            CHECK(io::read_file(dir / f) == io::read_file(again / f));
        }
        const auto b = nlohmann::json::parse(io::read_file(dir / "baselines.json"));
        CHECK(b["j_base"] == s.baselines.j_base);
        CHECK(b.contains("normalization"));
    }
    SUBCASE("zero noise leaves only the initial state") {
        ExperimentConfig c;
        c.test_batch = 20;
        c.noise_scale = 0.0;
        const auto s = build_setup(c);
        for (const auto& sc : s.test_batch) {
            CHECK(sc.dx.norm() == 0.0);
            CHECK(sc.dy.norm() == 0.0);
        }
        CHECK(s.baselines.j_opt <= s.baselines.j_base);
    }
    SUBCASE("constrained task reports both references") {
        ExperimentConfig c;
        c.task = rollout::TaskKind::InputConstrained;
        c.test_batch = 5;
        const auto s = build_setup(c);
        CHECK(s.baselines.normalize(s.baselines.j_base) == 1.0);
    }
}

TEST_CASE("train writes curves, checkpoints and a summary") {
    const auto dir = scratch_dir("train");
    auto c = quick_config();
    const auto results = cmd_train(c, dir);
    REQUIRE(results.size() == 2);
    std::vector<std::vector<train::CurvePoint>> curves;
    for (const auto seed : c.seeds) {
        const auto sd = dir / ("seed_" + std::to_string(seed));
        const auto curve = io::read_curve(sd / "curve.csv");
        CHECK(curve.size() == 3);
        curves.push_back(curve);
        const auto ck = nlohmann::json::parse(io::read_file(sd / "checkpoint.json"));
        CHECK(ck["epoch"] == 2);
        CHECK(ck["seed"] == seed);
    }
    const auto summary = io::read_file(dir / "summary.csv");
    CHECK(summary == summary_to_csv(summarize(curves)));
    const auto rows = summarize(curves);
    for (std::size_t e = 0; e < rows.size(); ++e)
        CHECK(rows[e].mean == doctest::Approx((curves[0][e].normalized_cost + curves[1][e].normalized_cost) / 2));
    CHECK(fs::exists(dir / "config.json"));

    // Stored policies evaluate to the last curve entry.
    const auto ev = cmd_eval(c, dir / "seed_1" / "checkpoint.json");
    CHECK(ev.cost == doctest::Approx(curves[1].back().test_cost).epsilon(1e-12));
    CHECK(ev.normalized == doctest::Approx(curves[1].back().normalized_cost).epsilon(1e-12));

    // Same configuration, same bytes.
    const auto again = scratch_dir("train_again");
    cmd_train(c, again);
    for (const char* f : {"seed_0/curve.csv", "seed_1/curve.csv", "summary.csv"})
        CHECK(io::read_file(dir / f) == io::read_file(again / f));
}

TEST_CASE("zero-epoch training and random search outputs") {
    const auto dir = scratch_dir("train_ars");
    auto c = quick_config();
    c.epochs = 0;
    c.grad_mode = train::GradMode::Ars;
    cmd_train(c, dir);
    CHECK(io::read_curve(dir / "seed_0" / "curve.csv").size() == 1);
    CHECK(io::read_file(dir / "seed_0" / "search.csv") == "epoch,base_max_state,perturbed_max_state\n");
    CHECK(summarize({}).empty());
}

TEST_CASE("eval rejects bad policy files") {
    const auto dir = scratch_dir("eval");
    io::write_file_atomic(dir / "junk.json", "{not json");
    CHECK_THROWS_AS(cmd_eval(quick_config(), dir / "junk.json"), ConfigError);
}

TEST_CASE("verify report") {
    const auto c = quick_config();
    const auto r = cmd_verify(c, quick_verify());
    for (const char* name : {"dare.control_residual", "dare.filter_residual",
                             "base.spectral_radius_A_minus_BK", "base.spectral_radius_A_minus_LC",
                             "ren.budget_bound_max", "ren.decay_ratio_max_200_steps",
                             "ren.empirical_minus_certified_gain_max", "youla.zero_operator_mismatch",
                             "youla.superposition_residual_max", "grad.oracle_median_relative_error",
                             "ars.perturbed_to_base_max_state_ratio"})
        CHECK_MESSAGE(entry(r, name).pass, name);
    // The contraction check is reported like any other entry; its outcome is measured.
    const auto& cl = entry(r, "youla.closed_loop_contraction_ratio_max");
    CHECK(cl.threshold == 1e-2);
    CHECK(cl.pass == (cl.measured <= cl.threshold));
    CHECK(r.all_pass() == std::all_of(r.entries.begin(), r.entries.end(), [](const CheckEntry& e) { return e.pass; }));

    const auto j = r.to_json();
    CHECK(j["checks"].size() == r.entries.size());
    CHECK(j["all_pass"] == r.all_pass());
    CHECK(cmd_verify(c, quick_verify()).to_json() == j);
}

TEST_CASE("verify catches a broken normalizer") {
    auto opts = quick_verify();
    opts.normalizer = [](const Matrix& m, double) { return m; };
    const auto r = cmd_verify(quick_config(), opts);
    CHECK_FALSE(entry(r, "ren.budget_bound_max").pass);
    CHECK_FALSE(r.all_pass());
}
