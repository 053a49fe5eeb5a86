#include "yoularen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "yoularen/io.hpp"
#include "yoularen/random.hpp"

namespace yoularen::experiment {

using nlohmann::json;
using rollout::TaskKind;
using toml_lite::Value;
using train::GradMode;
using youla::Arch;

std::string to_string(Model m) { return m == Model::Ren ? "ren" : "lben"; }

Model model_from_string(const std::string& s) {
    if (s == "ren") return Model::Ren;
    if (s == "lben") return Model::Lben;
    throw ConfigError("unknown model '" + s + "' (expected ren or lben)");
}

double default_learning_rate(TaskKind task, Arch arch, Model model, GradMode mode) {
    const bool lqg = task == TaskKind::Lqg;
    if (mode == GradMode::Exact) return arch == Arch::Youla ? 0.01 : 0.001;
    if (arch == Arch::Youla) return lqg ? 0.01 : 0.02;
    (void)model;  // REN and LBEN share a rate in every published cell
    return lqg ? 0.008 : 0.01;
}

void ExperimentConfig::validate() const {
    if (n_chi < 0 || n_v < 0) throw ConfigError("n_chi and n_v must be non-negative");
    if (lr && !(*lr > 0.0)) throw ConfigError("lr must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch < 1) throw ConfigError("batch must be at least 1");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw ConfigError("alpha_bar must lie in (0, 1)");
    if (!(out_scale > 0.0) || !std::isfinite(out_scale))
        throw ConfigError("out_scale must be positive and finite");
    if (!(out_scale_init >= 0.0)) throw ConfigError("out_scale_init must be non-negative");
    if (horizon && *horizon < 1) throw ConfigError("horizon must be at least 1");
    if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be non-negative");
    if (test_batch < 1) throw ConfigError("test_batch must be at least 1");
    try {
        ars.validate();
        train_config(seeds.front()).validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto& d = disturbance;
    if (!(d.x0_std >= 0.0) || d.segment_min < 1 || d.segment_max < d.segment_min ||
        !(d.segment_magnitude >= 0.0) || !(d.input_noise_std >= 0.0))
        throw ConfigError("invalid disturbance parameters");
    if (task == TaskKind::InputConstrained && !(u_bar > 0.0))
        throw ConfigError("u_bar must be positive for the constrained task");
    if (!(rho >= 0.0)) throw ConfigError("rho must be non-negative");
}

double ExperimentConfig::effective_lr() const {
    return lr.value_or(default_learning_rate(task, arch, model, grad_mode));
}

train::TrainConfig ExperimentConfig::train_config(std::uint64_t seed) const {
    train::TrainConfig t;
    t.epochs = epochs;
    t.lr = effective_lr();
    t.clip_norm = clip_norm;
    t.lr_drop_fraction = lr_drop_fraction;
    t.lr_drop_factor = lr_drop_factor;
    t.batch = batch;
    t.seed = seed;
    t.mode = grad_mode;
    t.ars = ars;
    t.out_scale_init = out_scale_init;
    return t;
}

rollout::TaskSpec ExperimentConfig::task_spec() const {
    auto spec = rollout::cartpole_task(task);
    if (horizon) spec.T = *horizon;
    if (task == TaskKind::InputConstrained) {
        spec.rho = rho;
        spec.u_bar = u_bar;
    }
    spec.noise.sigma_x *= noise_scale;
    spec.noise.sigma_y *= noise_scale;
    spec.disturbance = disturbance;
    return spec;
}

namespace {

double as_double(const std::string& key, const Value& v) {
    if (v.kind == Value::Kind::Float) return v.f;
    if (v.kind == Value::Kind::Int) return static_cast<double>(v.i);
    throw ConfigError("key '" + key + "' must be a number");
}

long as_long(const std::string& key, const Value& v) {
    if (v.kind != Value::Kind::Int) throw ConfigError("key '" + key + "' must be an integer");
    return static_cast<long>(v.i);
}

std::uint64_t as_seed(const std::string& key, const Value& v) {
    const long s = as_long(key, v);
    if (s < 0) throw ConfigError("key '" + key + "' must be a non-negative integer");
    return static_cast<std::uint64_t>(s);
}

std::string as_string(const std::string& key, const Value& v) {
    if (v.kind != Value::Kind::String) throw ConfigError("key '" + key + "' must be a string");
    return v.s;
}

template <class F>
auto translate(F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

using Setter = void (*)(ExperimentConfig&, const std::string&, const Value&);

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"task", [](ExperimentConfig& c, const std::string& k, const Value& v) {
             c.task = translate([&] { return rollout::task_from_string(as_string(k, v)); });
         }},
        {"arch", [](ExperimentConfig& c, const std::string& k, const Value& v) {
             c.arch = translate([&] { return youla::arch_from_string(as_string(k, v)); });
         }},
        {"model", [](ExperimentConfig& c, const std::string& k, const Value& v) {
             c.model = model_from_string(as_string(k, v));
         }},
        {"grad_mode", [](ExperimentConfig& c, const std::string& k, const Value& v) {
             c.grad_mode = translate([&] { return train::grad_mode_from_string(as_string(k, v)); });
         }},
        {"n_chi", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.n_chi = as_long(k, v); }},
        {"n_v", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.n_v = as_long(k, v); }},
        {"lr", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.lr = as_double(k, v); }},
        {"epochs", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.epochs = as_long(k, v); }},
        {"batch", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.batch = as_long(k, v); }},
        {"seeds", [](ExperimentConfig& c, const std::string& k, const Value& v) {
             c.seeds.clear();
             if (v.kind == Value::Kind::Int) {
                 c.seeds.push_back(as_seed(k, v));
                 return;
             }
             if (v.kind != Value::Kind::Array) throw ConfigError("key 'seeds' must be an array of integers");
             for (const auto& item : v.items) c.seeds.push_back(as_seed(k, item));
         }},
        {"output_dir", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.output_dir = as_string(k, v); }},
        {"alpha_bar", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.alpha_bar = as_double(k, v); }},
        {"out_scale", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.out_scale = as_double(k, v); }},
        {"out_scale_init", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.out_scale_init = as_double(k, v); }},
        {"clip_norm", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.clip_norm = as_double(k, v); }},
        {"lr_drop_fraction", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.lr_drop_fraction = as_double(k, v); }},
        {"lr_drop_factor", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.lr_drop_factor = as_double(k, v); }},
        {"ars.m_dirs", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.ars.m_dirs = as_long(k, v); }},
        {"ars.b_batch", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.ars.b_batch = as_long(k, v); }},
        {"ars.nu", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.ars.nu = as_double(k, v); }},
        {"ars.sigma_floor", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.ars.sigma_floor = as_double(k, v); }},
        {"horizon", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.horizon = as_long(k, v); }},
        {"rho", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.rho = as_double(k, v); }},
        {"u_bar", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.u_bar = as_double(k, v); }},
        {"noise_scale", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.noise_scale = as_double(k, v); }},
        {"disturbance.x0_std", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.disturbance.x0_std = as_double(k, v); }},
        {"disturbance.segment_min", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.disturbance.segment_min = as_long(k, v); }},
        {"disturbance.segment_max", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.disturbance.segment_max = as_long(k, v); }},
        {"disturbance.segment_magnitude", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.disturbance.segment_magnitude = as_double(k, v); }},
        {"disturbance.input_noise_std", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.disturbance.input_noise_std = as_double(k, v); }},
        {"test_batch", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.test_batch = as_long(k, v); }},
        {"test_seed", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.test_seed = as_seed(k, v); }},
        {"base_seed", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.base_seed = as_seed(k, v); }},
    };
    return table;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const Value& v) {
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, key, v);
}

}  // namespace

ExperimentConfig config_from_toml(const toml_lite::Document& doc) {
    ExperimentConfig cfg;
    for (const auto& key : doc.keys()) {
        try {
            set_key(cfg, key, doc.at(key));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (line " + std::to_string(doc.at(key).line) + ")");
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return config_from_toml(toml_lite::parse(text, path.string()));
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    Value v;
    try {
        v = toml_lite::parse_value(raw);
    } catch (const ConfigError&) {
        // Bare words such as task=lqg are taken as strings.
        v.kind = Value::Kind::String;
        v.s = raw;
    }
    set_key(cfg, key, v);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["task"] = rollout::to_string(cfg.task);
    j["arch"] = youla::to_string(cfg.arch);
    j["model"] = to_string(cfg.model);
    j["grad_mode"] = train::to_string(cfg.grad_mode);
    j["n_chi"] = cfg.effective_n_chi();
    j["n_v"] = cfg.n_v;
    j["lr"] = cfg.effective_lr();
    j["epochs"] = cfg.epochs;
    j["batch"] = cfg.batch;
    j["seeds"] = cfg.seeds;
    j["alpha_bar"] = cfg.alpha_bar;
    j["out_scale"] = cfg.out_scale;
    j["out_scale_init"] = cfg.out_scale_init;
    j["clip_norm"] = cfg.clip_norm;
    j["lr_drop_fraction"] = cfg.lr_drop_fraction;
    j["lr_drop_factor"] = cfg.lr_drop_factor;
    j["ars"] = {{"m_dirs", cfg.ars.m_dirs}, {"b_batch", cfg.ars.b_batch}, {"nu", cfg.ars.nu},
                {"sigma_floor", cfg.ars.sigma_floor}};
    const auto spec = cfg.task_spec();
    j["horizon"] = spec.T;
    j["rho"] = spec.rho;
    j["u_bar"] = spec.u_bar;
    j["noise_scale"] = cfg.noise_scale;
    const auto& d = cfg.disturbance;
    j["disturbance"] = {{"x0_std", d.x0_std},
                        {"segment_min", d.segment_min},
                        {"segment_max", d.segment_max},
                        {"segment_magnitude", d.segment_magnitude},
                        {"input_noise_std", d.input_noise_std}};
    j["test_batch"] = cfg.test_batch;
    j["test_seed"] = cfg.test_seed;
    j["base_seed"] = cfg.base_seed;
    return j;
}

Setup build_setup(const ExperimentConfig& cfg) {
    cfg.validate();
    Setup s;
    s.sys = lti::build_cartpole();
    s.task = cfg.task_spec();
    s.task.validate(s.sys);
    const auto design = lti::random_lqg_design(s.sys, cfg.base_seed);
    s.base_gains = lti::lqg_gains(s.sys, design.weights, design.noise);
    const double x0_var = cfg.disturbance.x0_std * cfg.disturbance.x0_std;
    s.optimal = lti::finite_horizon_lqg(s.sys, s.task.weights, s.task.noise, s.task.T,
                                        Matrix(x0_var * Matrix::Identity(s.sys.nx(), s.sys.nx())));
    s.test_batch = rollout::sample_batch(s.sys, s.task, derive_seed(cfg.test_seed, {kTestStream}),
                                         static_cast<std::size_t>(cfg.test_batch));
    const auto base = youla::Policy::make(
        Arch::Youla, youla::BaseController::make(s.sys, s.base_gains),
        ren::RenWeights::zeros(ren::RenDims{0, 0, s.sys.ny(), s.sys.nu()}));
    s.baselines.kind = cfg.task;
    s.baselines.j_base = rollout::batch_cost(s.sys, base, s.test_batch, s.task);
    s.baselines.j_opt = rollout::batch_cost_finite_horizon(s.sys, s.optimal, s.test_batch, s.task);
    return s;
}

grad::Problem make_problem(const ExperimentConfig& cfg, const Setup& setup) {
    return grad::Problem::make(setup.sys, setup.base_gains, cfg.arch, setup.task,
                               cfg.effective_n_chi(), cfg.n_v, cfg.alpha_bar, cfg.out_scale);
}

namespace {

json optimal_to_json(const lti::FiniteHorizonLqg& lqg) {
    json K = json::array(), M = json::array();
    for (std::size_t t = 0; t < lqg.horizon(); ++t) {
        K.push_back(io::to_json(lqg.K[t]));
        M.push_back(io::to_json(lqg.M[t]));
    }
    return {{"form", "filtered"}, {"K", K}, {"M", M}};
}

std::string search_to_csv(const std::vector<train::SearchRecord>& rows) {
    std::string out = "epoch,base_max_state,perturbed_max_state\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + io::format_double(r.base_max_state) + "," +
               io::format_double(r.perturbed_max_state) + "\n";
    return out;
}

}  // namespace

Setup cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    Setup s = build_setup(cfg);
    const auto task_doc = io::lti_to_json(s.sys, &s.task.weights, &s.task.noise);
    io::write_file_atomic(dir / "plant.json", task_doc.dump(2) + "\n");
    io::write_file_atomic(dir / "base_controller.json",
                          io::base_controller_to_json(s.sys, s.base_gains).dump(2) + "\n");
    io::write_file_atomic(dir / "optimal_policy.json", optimal_to_json(s.optimal).dump() + "\n");
    json b;
    b["task"] = rollout::to_string(s.task.kind);
    b["j_base"] = s.baselines.j_base;
    b["j_opt"] = s.baselines.j_opt;
    b["test_batch"] = cfg.test_batch;
    b["test_seed"] = cfg.test_seed;
    b["normalization"] = s.task.kind == TaskKind::Lqg ? "(J - j_opt) / (j_base - j_opt)"
                                                      : "J / j_base";
    b["conventions"] = {
        {"base_controller", "infinite-horizon LQG tuned with random weights, seed base_seed"},
        {"optimal_controller", "finite-horizon LQG (filtered form) with prior covariance x0_std^2 I"},
        {"test_set", "held-out batch of test_batch scenarios derived from test_seed"}};
    io::write_file_atomic(dir / "baselines.json", b.dump(2) + "\n");
    io::write_scenarios(dir / "test_scenarios.jsonl", s.test_batch);
    return s;
}

std::vector<SummaryRow> summarize(const std::vector<std::vector<train::CurvePoint>>& curves) {
    if (curves.empty()) return {};
    const std::size_t n = curves.front().size();
    for (const auto& c : curves)
        if (c.size() != n) throw std::invalid_argument("summarize: curves differ in length");
    std::vector<SummaryRow> rows(n);
    for (std::size_t e = 0; e < n; ++e) {
        double sum = 0.0, lo = INFINITY, hi = -INFINITY;
        for (const auto& c : curves) {
            const double v = c[e].normalized_cost;
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        rows[e] = {curves.front()[e].epoch, sum / static_cast<double>(curves.size()), lo, hi};
    }
    return rows;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
    std::string out = "epoch,mean,min,max\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + io::format_double(r.mean) + "," +
               io::format_double(r.min) + "," + io::format_double(r.max) + "\n";
    return out;
}

std::vector<SeedResult> cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const Setup setup = cmd_synth(cfg, dir);
    const auto prob = make_problem(cfg, setup);
    io::write_file_atomic(dir / "config.json", config_to_json(cfg).dump(2) + "\n");

    std::vector<SeedResult> results;
    std::vector<std::vector<train::CurvePoint>> curves;
    // Seeds run one after another; rollouts inside each run use all cores.
    for (const auto seed : cfg.seeds) {
        const auto seed_dir = dir / ("seed_" + std::to_string(seed));
        const auto tc = cfg.train_config(seed);
        auto checkpoint = [&](long epoch, const Vector& theta) {
            auto snap = io::policy_to_json(setup.sys, setup.base_gains, cfg.arch,
                                           ren::RenTheta::from_flat(theta, prob.dims, prob.alpha_bar,
                                                                    prob.out_scale));
            snap["epoch"] = epoch;
            snap["seed"] = seed;
            io::write_file_atomic(seed_dir / "checkpoint.json", snap.dump(2) + "\n");
        };
        train::TrainRun run;
        try {
            run = train::train_loop(prob, tc, setup.test_batch, setup.baselines, std::nullopt,
                                    checkpoint);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (seed " + std::to_string(seed) + ")",
                                 e.step(), e.scenario(), e.epoch());
        }
        io::write_file_atomic(seed_dir / "curve.csv", io::curve_to_csv(run.curve));
        if (cfg.grad_mode == GradMode::Ars)
            io::write_file_atomic(seed_dir / "search.csv", search_to_csv(run.search));
        curves.push_back(run.curve);
        results.push_back({seed, std::move(run)});
    }
    io::write_file_atomic(dir / "summary.csv", summary_to_csv(summarize(curves)));
    return results;
}

EvalResult cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& policy_file) {
    const Setup setup = build_setup(cfg);
    io::PolicySnapshot snap;
    try {
        snap = io::policy_from_json(json::parse(io::read_file(policy_file)), setup.sys);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(policy_file.string() + ": " + e.what());
    }
    if (snap.theta.dims.n_in != setup.sys.ny() || snap.theta.dims.n_out != setup.sys.nu())
        throw ConfigError(policy_file.string() + ": network does not match the plant");
    const auto policy = youla::Policy::make(snap.arch,
                                            youla::BaseController::make(setup.sys, snap.gains),
                                            ren::direct_param(snap.theta));
    EvalResult r;
    r.cost = rollout::batch_cost(setup.sys, policy, setup.test_batch, setup.task);
    r.normalized = setup.baselines.normalize(r.cost);
    r.j_base = setup.baselines.j_base;
    r.j_opt = setup.baselines.j_opt;
    return r;
}

bool VerifyReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.pass; });
}

json VerifyReport::to_json() const {
    json list = json::array();
    for (const auto& e : entries)
        list.push_back({{"name", e.name},
                        {"measured", e.measured},
                        {"threshold", e.threshold},
                        {"comparison", e.comparison},
                        {"pass", e.pass}});
    return {{"checks", list}, {"all_pass", all_pass()}};
}

namespace {

void add_check(VerifyReport& r, const std::string& name, double measured, const std::string& cmp,
               double threshold) {
    bool pass = false;
    if (std::isfinite(measured)) {
        if (cmp == "<=") pass = measured <= threshold;
        else if (cmp == "<") pass = measured < threshold;
        else if (cmp == ">=") pass = measured >= threshold;
        else if (cmp == "==") pass = measured == threshold;
    }
    r.entries.push_back({name, measured, threshold, cmp, pass});
}

// Runs one check; an exception counts as a failed measurement.
template <class Fn>
void guarded(VerifyReport& r, const std::string& name, const std::string& cmp, double threshold,
             Fn&& measure) {
    double measured = INFINITY;
    try {
        measured = measure();
    } catch (const std::exception&) {
    }
    add_check(r, name, measured, cmp, threshold);
}

// Free parameters whose entries are N(0,1) scaled by 10^u, u ~ U[-6, 6].
ren::RenTheta wide_theta(const ren::RenDims& dims, std::uint64_t seed, double alpha_bar,
                         double out_scale) {
    auto th = ren::RenTheta::random(dims, seed, alpha_bar, out_scale, out_scale);
    Rng rng(derive_seed(seed, {1}));
    std::uniform_real_distribution<double> expo(-6.0, 6.0);
    return ren::RenTheta::from_flat(th.to_flat() * std::pow(10.0, expo(rng)), dims, alpha_bar,
                                    out_scale);
}

}  // namespace

VerifyReport cmd_verify(const ExperimentConfig& cfg, const VerifyOptions& opts) {
    VerifyReport rep;
    const auto sys = lti::build_cartpole();
    const auto task = cfg.task_spec();

    // Riccati solutions of the task design and of the randomly tuned base design.
    const auto design = lti::random_lqg_design(sys, cfg.base_seed);
    double control_res = 0.0, filter_res = 0.0;
    for (const auto& [w, n] : {std::pair{task.weights, task.noise}, std::pair{design.weights, design.noise}}) {
        const Matrix P = lti::dare_solve(sys.A, sys.B, w.Q, w.R);
        const Matrix S = lti::dare_solve(sys.A.transpose(), sys.C.transpose(), n.sigma_x, n.sigma_y);
        control_res = std::max(control_res, lti::dare_residual(sys.A, sys.B, w.Q, w.R, P));
        filter_res = std::max(filter_res, lti::dare_residual(sys.A.transpose(), sys.C.transpose(),
                                                             n.sigma_x, n.sigma_y, S));
    }
    add_check(rep, "dare.control_residual", control_res, "<=", 1e-8);
    add_check(rep, "dare.filter_residual", filter_res, "<=", 1e-8);
    const auto gains = lti::lqg_gains(sys, design.weights, design.noise);
    add_check(rep, "base.spectral_radius_A_minus_BK", spectral_radius(sys.A - sys.B * gains.K), "<", 1.0);
    add_check(rep, "base.spectral_radius_A_minus_LC", spectral_radius(sys.A - gains.L * sys.C), "<", 1.0);

    // Network certificates over parameters spanning twelve orders of magnitude.
    const ren::RenDims dims{cfg.effective_n_chi(), cfg.n_v, sys.ny(), sys.nu()};
    std::vector<ren::RenWeights> samples;
    for (int k = 0; k < opts.ren_samples; ++k)
        samples.push_back(ren::direct_param(
            wide_theta(dims, derive_seed(opts.seed, {kInitStream, 1, static_cast<std::uint64_t>(k)}), cfg.alpha_bar,
                       cfg.out_scale),
            opts.normalizer));
    guarded(rep, "ren.budget_bound_max", "<=", cfg.alpha_bar, [&] {
        double worst = 0.0;
        for (const auto& w : samples) worst = std::max(worst, ren::budget_bound(w));
        return worst;
    });
    guarded(rep, "ren.decay_ratio_max_200_steps", "<=", 1e-3, [&] {
        double worst = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k)
            worst = std::max(worst, ren::verify_ren(samples[k], 2, 200, derive_seed(opts.seed, {2, k})).max_decay_ratio);
        return worst;
    });
    guarded(rep, "ren.empirical_minus_certified_gain_max", "<=", 1e-9, [&] {
        double worst = -INFINITY;
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const auto r = ren::verify_ren(samples[k], 2, 200, derive_seed(opts.seed, {2, k}));
            worst = std::max(worst, r.empirical_gain - ren::certified_gain(samples[k]));
        }
        return worst;
    });

    // Youla structure: zero operator, superposition and closed-loop contraction.
    const auto lqg_task = rollout::cartpole_task(TaskKind::Lqg);
    guarded(rep, "youla.zero_operator_mismatch", "==", 0.0, [&] {
        const auto zero_q = youla::Policy::make(Arch::Youla, youla::BaseController::make(sys, gains),
                                                ren::RenWeights::zeros(dims, cfg.alpha_bar));
        const auto s = rollout::sample_scenario(sys, lqg_task, derive_seed(opts.seed, {3}));
        const auto tr = rollout::simulate(sys, zero_q, s);
        auto base = youla::BaseController::make(sys, gains);
        Vector x = s.x0;
        double mismatch = 0.0;
        for (long t = 0; t < s.horizon(); ++t) {
            const Vector y = sys.C * x + s.dy.row(t).transpose();
            auto step = youla::base_step(base, y);
            mismatch = std::max(mismatch, (step.u - tr.u.row(t).transpose()).cwiseAbs().maxCoeff());
            x = sys.A * x + sys.B * step.u + s.dx.row(t).transpose();
            base = std::move(step.next);
        }
        return mismatch;
    });
    guarded(rep, "youla.superposition_residual_max", "<=", 1e-8, [&] {
        double worst = 0.0;
        for (int k = 0; k < opts.superposition_samples; ++k) {
            const auto key = static_cast<std::uint64_t>(k);
            const auto w = ren::direct_param(
                ren::RenTheta::random(dims, derive_seed(opts.seed, {4, key}), cfg.alpha_bar,
                                      cfg.out_scale, cfg.out_scale),
                opts.normalizer);
            auto s = rollout::sample_scenario(sys, lqg_task, derive_seed(opts.seed, {5, key}));
            s.x0.setZero();
            worst = std::max(worst, youla::verify_superposition(sys, gains, w, s));
        }
        return worst;
    });
    guarded(rep, "youla.closed_loop_contraction_ratio_max", "<=", 1e-2, [&] {
        auto long_task = lqg_task;
        long_task.T = 200;
        double worst = 0.0;
        for (int k = 0; k < opts.stability_samples; ++k) {
            const auto key = static_cast<std::uint64_t>(k);
            const double scale = k % 2 == 0 ? 1.0 : 1e3;
            auto th = ren::RenTheta::random(dims, derive_seed(opts.seed, {6, key}), cfg.alpha_bar,
                                            cfg.out_scale, cfg.out_scale);
            th = ren::RenTheta::from_flat(scale * th.to_flat(), dims, cfg.alpha_bar, cfg.out_scale);
            const auto policy = youla::Policy::make(Arch::Youla, youla::BaseController::make(sys, gains),
                                                    ren::direct_param(th, opts.normalizer));
            const auto s = rollout::sample_scenario(sys, long_task, derive_seed(opts.seed, {7, key}));
            Rng rng(derive_seed(opts.seed, {8, key}));
            const Eigen::Index n = 2 * sys.nx() + dims.n_chi;
            const auto probe = rollout::contraction_probe(sys, policy, s, standard_normal(rng, n),
                                                          standard_normal(rng, n));
            worst = std::max(worst, probe.ratio);
        }
        return worst;
    });

    // Gradient oracle and stability during random search, at the standard initialization.
    const auto prob = grad::Problem::make(sys, gains, cfg.arch, lqg_task, cfg.effective_n_chi(),
                                          cfg.n_v, cfg.alpha_bar, cfg.out_scale);
    const Vector theta0 =
        ren::RenTheta::random(prob.dims, derive_seed(opts.seed, {kInitStream}), cfg.alpha_bar,
                              cfg.out_scale_init, cfg.out_scale)
            .to_flat();
    guarded(rep, "grad.oracle_median_relative_error", "<=", 1e-5, [&] {
        const auto batch = rollout::sample_batch(sys, lqg_task, derive_seed(opts.seed, {kTrainStream}), 4);
        return grad::oracle_check(prob, theta0, batch, 20, derive_seed(opts.seed, {9}), 1e-4)
            .median_relative_error;
    });
    guarded(rep, "ars.perturbed_to_base_max_state_ratio", "<=", 10.0, [&] {
        const auto batch = rollout::sample_batch(sys, lqg_task, derive_seed(opts.seed, {10}),
                                                 static_cast<std::size_t>(cfg.ars.b_batch));
        const Vector theta1 =
            ren::RenTheta::random(prob.dims, derive_seed(opts.seed, {11}), cfg.alpha_bar,
                                  cfg.out_scale, cfg.out_scale)
                .to_flat();
        double worst = 0.0;
        for (const Vector* th : {&theta0, &theta1}) {
            const auto res = train::ars_gradient(prob, *th, cfg.ars, batch, derive_seed(opts.seed, {kArsStream}));
            worst = std::max(worst, res.perturbed_max_state / res.base_max_state);
        }
        return worst;
    });
    return rep;
}

}  // namespace yoularen::experiment
