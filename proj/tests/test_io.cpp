#include <doctest.h>

#include <charconv>
#include <filesystem>
#include <limits>

#include "yoularen/io.hpp"
#include "yoularen/svg_plot.hpp"
#include "yoularen/toml_lite.hpp"

using namespace yoularen;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("yoularen_test_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<train::CurvePoint> curve(std::initializer_list<double> normalized) {
    std::vector<train::CurvePoint> c;
    long e = 0;
    for (double v : normalized) c.push_back({e++, 2.0 * v, v, v});
    return c;
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("toml subset") {
    const std::string text = R"(# experiment
task = "lqg"   # trailing comment
epochs = 1_000
lr = 1e-3
flag = true
seeds = [0, 1,
         2]   # continues

[ars]
m_dirs = 40
nu = 0.01
)";
    const auto doc = toml_lite::parse(text, "x.toml");
    CHECK(doc.get_string("task") == "lqg");
    CHECK(doc.get_int("epochs") == 1000);
    CHECK(doc.get_double("lr") == 1e-3);
    CHECK(doc.get_bool("flag"));
    CHECK(doc.get_int_array("seeds") == std::vector<long long>{0, 1, 2});
    CHECK(doc.get_int("ars.m_dirs") == 40);
    CHECK(doc.get_double("ars.nu") == 0.01);
    CHECK(doc.get_double("ars.m_dirs") == 40.0);
    CHECK(doc.at("ars.nu").line == 11);
    CHECK_FALSE(doc.contains("nu"));
    CHECK_THROWS_AS(doc.get_int("task"), ConfigError);
    CHECK_THROWS_AS(doc.at("missing"), ConfigError);

    const auto dotted = toml_lite::parse("ars.nu = 0.5\n");
    CHECK(dotted.get_double("ars.nu") == 0.5);
}

TEST_CASE("toml errors name the line") {
    auto message = [](const std::string& text) {
        try {
            toml_lite::parse(text, "bad.toml");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("a = 1\nb = \n").find("bad.toml:2") != std::string::npos);
    CHECK(message("a = 1\na = 2\n").find("bad.toml:2") != std::string::npos);
    CHECK(message("x = \"open\n").find("bad.toml:1") != std::string::npos);
    CHECK(message("[ars\n").find("bad.toml:1") != std::string::npos);
    CHECK(message("s = [1, 2\n").find("bad.toml") != std::string::npos);
    CHECK_FALSE(message("ok = 1\n").size());
}

TEST_CASE("json round trips") {
    const auto sys = lti::build_cartpole();
    const auto doc = io::lti_from_json(io::lti_to_json(sys));
    CHECK(doc.sys.A == sys.A);
    CHECK(doc.sys.B == sys.B);
    CHECK(doc.sys.C == sys.C);
    CHECK_FALSE(doc.weights.has_value());
    CHECK(io::system_hash(sys).size() == 16);
    auto other = sys;
    other.A(0, 0) += 1e-15;
    CHECK(io::system_hash(other) != io::system_hash(sys));

    const auto th = ren::RenTheta::random(ren::RenDims{3, 4, 2, 1}, 5);
    const auto back = io::theta_from_json(io::theta_to_json(th));
    CHECK((back.to_flat().array() == th.to_flat().array()).all());
    CHECK(back.alpha_bar == th.alpha_bar);
    CHECK(back.out_scale == th.out_scale);
    CHECK(back.dims == th.dims);

    const auto d = lti::random_lqg_design(sys, 0);
    const auto g = lti::lqg_gains(sys, d.weights, d.noise);
    const auto snap = io::policy_from_json(io::policy_to_json(sys, g, youla::Arch::Feedback, th), sys);
    CHECK(snap.arch == youla::Arch::Feedback);
    CHECK(snap.gains.K == g.K);
    CHECK(snap.gains.L == g.L);
    // A controller stored for one plant is refused for another.
    CHECK_THROWS(io::base_gains_from_json(io::base_controller_to_json(sys, g), other));

    auto bad = io::theta_to_json(th);
    bad["theta"]["A"] = io::to_json(Matrix(Matrix::Zero(2, 2)));
    CHECK_THROWS(io::theta_from_json(bad));
}

TEST_CASE("scenario files") {
    const auto sys = lti::build_cartpole();
    const auto batch = rollout::sample_batch(sys, rollout::cartpole_task(rollout::TaskKind::Lqg), 3, 4);
    const auto dir = scratch_dir("scenarios");
    io::write_scenarios(dir / "s.jsonl", batch);
    const auto back = io::read_scenarios(dir / "s.jsonl");
    REQUIRE(back.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back[i].x0 == batch[i].x0);
        CHECK(back[i].dx == batch[i].dx);
        CHECK(back[i].dy == batch[i].dy);
        CHECK(back[i].seed == batch[i].seed);
    }
    io::write_file_atomic(dir / "broken.jsonl", io::scenario_to_json(batch[0]).dump() + "\n{oops\n");
    try {
        io::read_scenarios(dir / "broken.jsonl");
        FAIL("expected a parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("broken.jsonl:2") != std::string::npos);
    }
}

TEST_CASE("curve csv") {
    std::vector<train::CurvePoint> c{{0, 1.5, 2.25, 1.0}, {1, 0.1, 1.0 / 3.0, -0.0}, {2, 1e300, 5e-324, 0.5}};
    const auto text = io::curve_to_csv(c);
    CHECK(text.rfind("epoch,train_cost,test_cost,normalized_cost\n", 0) == 0);
    const auto back = io::curve_from_csv(text, "mem");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].epoch == c[i].epoch);
        CHECK(back[i].train_cost == c[i].train_cost);
        CHECK(back[i].test_cost == c[i].test_cost);
        CHECK(back[i].normalized_cost == c[i].normalized_cost);
    }
    CHECK(io::curve_to_csv(back) == text);

    auto error = [](const std::string& t) {
        try {
            io::curve_from_csv(t, "c.csv");
        } catch (const std::exception& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(error("epoch,train_cost,test_cost,normalized_cost\n0,1,2,3\n1,1,x,3\n").find("c.csv:3") != std::string::npos);
    CHECK(error("epoch,train_cost,test_cost,normalized_cost\n0,1,2\n").find("c.csv:2") != std::string::npos);
    CHECK(error("epoch,cost\n").find("c.csv:1") != std::string::npos);
    CHECK(error("").find("c.csv") != std::string::npos);
}

TEST_CASE("format_double round trips") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5, 6.02214076e23, std::numeric_limits<double>::denorm_min()})
    {
        const auto text = io::format_double(x);
        double y = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), y);
        CHECK(y == x);
    }
    CHECK(io::format_double(2.0) == "2");
}

TEST_CASE("atomic writes") {
    const auto dir = scratch_dir("atomic");
    io::write_file_atomic(dir / "a" / "b.txt", "first");
    io::write_file_atomic(dir / "a" / "b.txt", "second");
    CHECK(io::read_file(dir / "a" / "b.txt") == "second");
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        (void)entry;
        ++files;
    }
    CHECK(files == 1);
    CHECK_THROWS(io::read_file(dir / "missing.txt"));
}

TEST_CASE("plot bands") {
    plot::Series s{"youla", {curve({1.0, 0.5, 0.2}), curve({1.0, 0.7, 0.1}), curve({1.0, 0.6, 0.3})}};
    const auto b = plot::band_of(s);
    CHECK(b.lo == std::vector<double>{1.0, 0.5, 0.1});
    CHECK(b.hi == std::vector<double>{1.0, 0.7, 0.3});
    CHECK(b.mean[1] == doctest::Approx(0.6));

    plot::Series same{"same", {curve({1.0, 0.4}), curve({1.0, 0.4})}};
    const auto z = plot::band_of(same);
    CHECK(z.lo == z.hi);

    plot::Series ragged{"ragged", {curve({1.0}), curve({1.0, 0.5})}};
    CHECK_THROWS(plot::band_of(ragged));
}

TEST_CASE("svg output") {
    const auto svg = plot::render_svg({{"youla-ren", {curve({1.0, 0.5, 0.2}), curve({1.0, 0.4, 0.3})}},
                                       {"feedback-ren", {curve({1.0, 0.9, 0.8})}}},
                                      "a < b");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count(svg, "class=\"reference\"") == 2);
    CHECK(count(svg, "class=\"band\"") == 2);
    CHECK(count(svg, "class=\"mean\"") == 2);
    CHECK(count(svg, "class=\"marker\"") == 0);
    CHECK(svg.find("a &lt; b") != std::string::npos);
    CHECK(svg.find("feedback-ren") != std::string::npos);

    const auto single = plot::render_svg({{"one", {curve({0.7})}}});
    CHECK(count(single, "class=\"marker\"") == 1);
    CHECK(count(single, "class=\"band\"") == 0);
    CHECK_THROWS(plot::render_svg({}));
}
