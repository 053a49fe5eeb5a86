// Batch front-end: synth, train, eval, verify, plot.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "yoularen/experiment.hpp"
#include "yoularen/io.hpp"
#include "yoularen/svg_plot.hpp"

namespace fs = std::filesystem;
using namespace yoularen;

namespace {

enum Exit { kOk = 0, kInvariant = 1, kConfig = 2, kNumerical = 3 };

struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::string task, arch, model, grad_mode;
    std::optional<long> epochs;
    std::optional<double> lr;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "TOML experiment configuration");
    cmd->add_option("-o,--out", c.out, "Output directory (default: output_dir from the config, else ./out)");
    cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set ars.nu=0.02")->take_all();
    cmd->add_option("--task", c.task, "lqg | constrained");
    cmd->add_option("--arch", c.arch, "youla | feedback");
    cmd->add_option("--model", c.model, "ren | lben");
    cmd->add_option("--grad-mode", c.grad_mode, "exact | ars");
    cmd->add_option("--epochs", c.epochs, "Training epochs");
    cmd->add_option("--lr", c.lr, "Learning rate (default: published rate for the configuration)");
}

experiment::ExperimentConfig resolve(const Common& c) {
    auto cfg = c.config.empty() ? experiment::ExperimentConfig{} : experiment::load_config(c.config);
    if (!c.task.empty()) experiment::apply_override(cfg, "task=" + c.task);
    if (!c.arch.empty()) experiment::apply_override(cfg, "arch=" + c.arch);
    if (!c.model.empty()) experiment::apply_override(cfg, "model=" + c.model);
    if (!c.grad_mode.empty()) experiment::apply_override(cfg, "grad_mode=" + c.grad_mode);
    if (c.epochs) cfg.epochs = *c.epochs;
    if (c.lr) cfg.lr = *c.lr;
    for (const auto& o : c.overrides) experiment::apply_override(cfg, o);
    if (!c.out.empty()) cfg.output_dir = c.out;
    cfg.validate();
    return cfg;
}

// "label=a.csv,b.csv", a training output directory, or a single CSV file.
plot::Series load_series(const std::string& arg) {
    plot::Series s;
    std::string spec = arg;
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
        s.label = arg.substr(0, eq);
        spec = arg.substr(eq + 1);
    }
    std::vector<fs::path> files;
    if (fs::is_directory(spec)) {
        for (const auto& entry : fs::directory_iterator(spec)) {
            const auto curve = entry.path() / "curve.csv";
            if (entry.is_directory() && fs::exists(curve)) files.push_back(curve);
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw std::runtime_error(spec + ": no seed_*/curve.csv files found");
        if (s.label.empty()) s.label = fs::path(spec).filename().string();
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) files.emplace_back(item);
        if (s.label.empty()) s.label = files.front().stem().string();
    }
    for (const auto& f : files) s.curves.push_back(io::read_curve(f));
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn Youla-REN controllers for the cart-pole"};
    app.require_subcommand(1);

    Common synth_opts, train_opts, eval_opts, verify_opts;
    auto* synth = app.add_subcommand("synth", "Synthesize the base and optimal controllers and the test batch");
    add_common(synth, synth_opts);

    auto* trn = app.add_subcommand("train", "Train one policy per seed and write learning curves");
    add_common(trn, train_opts);
    std::optional<std::uint64_t> train_seed;
    trn->add_option("--seed", train_seed, "Train a single seed instead of the configured list");

    auto* eval = app.add_subcommand("eval", "Test-batch cost of a stored policy");
    add_common(eval, eval_opts);
    std::string policy_file;
    eval->add_option("--policy", policy_file, "Policy snapshot (checkpoint.json)")->required();

    auto* verify = app.add_subcommand("verify", "Run the invariant checks and write a JSON report");
    add_common(verify, verify_opts);
    std::uint64_t verify_seed = 0;
    bool corrupt = false;
    verify->add_option("--seed", verify_seed, "Seed for the sampled checks")->capture_default_str();
    verify->add_flag("--corrupt-normalizer", corrupt, "Fault injection: disable the norm budget");

    auto* plt = app.add_subcommand("plot", "Draw learning curves as SVG");
    std::vector<std::string> inputs;
    std::string plot_out = "curves.svg", title;
    plt->add_option("inputs", inputs, "Series: DIR, FILE.csv or label=A.csv,B.csv")->required();
    plt->add_option("-o,--out", plot_out, "Output SVG")->capture_default_str();
    plt->add_option("--title", title, "Figure title");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*synth) {
            const auto cfg = resolve(synth_opts);
            const auto s = experiment::cmd_synth(cfg, cfg.output_dir);
            std::printf("j_base %s\nj_opt %s\nwritten to %s\n", io::format_double(s.baselines.j_base).c_str(),
                        io::format_double(s.baselines.j_opt).c_str(), cfg.output_dir.c_str());
        } else if (*trn) {
            auto cfg = resolve(train_opts);
            if (train_seed) cfg.seeds = {*train_seed};
            const auto results = experiment::cmd_train(cfg, cfg.output_dir);
            for (const auto& r : results) {
                const auto& first = r.run.curve.front();
                const auto& last = r.run.curve.back();
                std::printf("seed %llu: normalized test cost %s -> %s\n",
                            static_cast<unsigned long long>(r.seed),
                            io::format_double(first.normalized_cost).c_str(),
                            io::format_double(last.normalized_cost).c_str());
            }
        } else if (*eval) {
            const auto cfg = resolve(eval_opts);
            const auto r = experiment::cmd_eval(cfg, policy_file);
            std::printf("cost %s\nnormalized %s\n", io::format_double(r.cost).c_str(),
                        io::format_double(r.normalized).c_str());
        } else if (*verify) {
            const auto cfg = resolve(verify_opts);
            experiment::VerifyOptions opts;
            opts.seed = verify_seed;
            if (corrupt) opts.normalizer = [](const Matrix& m, double) { return m; };
            const auto rep = experiment::cmd_verify(cfg, opts);
            io::write_file_atomic(fs::path(cfg.output_dir) / "verify.json", rep.to_json().dump(2) + "\n");
            for (const auto& e : rep.entries)
                std::printf("%-4s %-45s %s %s %s\n", e.pass ? "ok" : "FAIL", e.name.c_str(),
                            io::format_double(e.measured).c_str(), e.comparison.c_str(),
                            io::format_double(e.threshold).c_str());
            return rep.all_pass() ? kOk : kInvariant;
        } else if (*plt) {
            std::vector<plot::Series> series;
            try {
                for (const auto& in : inputs) series.push_back(load_series(in));
            } catch (const std::runtime_error& e) {
                throw ConfigError(e.what());
            }
            io::write_file_atomic(plot_out, plot::render_svg(series, title));
            std::printf("written to %s\n", plot_out.c_str());
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what();
        if (e.epoch() >= 0) std::cerr << " (epoch " << e.epoch() << ")";
        if (e.scenario() >= 0) std::cerr << " (scenario " << e.scenario() << ")";
        if (e.step() >= 0) std::cerr << " (step " << e.step() << ")";
        std::cerr << "\n";
        return kNumerical;
    } catch (const lti::DareError& e) {
        std::cerr << "synthesis failed: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvariant;
    }
    return kOk;
}
