#include <doctest.h>

#include <cmath>

#include "yoularen/random.hpp"
#include "yoularen/train.hpp"

using namespace yoularen;
using namespace yoularen::train;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

grad::Problem small_problem(youla::Arch arch = youla::Arch::Youla) {
    const auto sys = lti::build_cartpole();
    const auto d = lti::random_lqg_design(sys, 0);
    auto task = rollout::cartpole_task(rollout::TaskKind::Lqg);
    task.T = 20;
    return grad::Problem::make(sys, lti::lqg_gains(sys, d.weights, d.noise), arch, task, 3, 4);
}

}  // namespace

TEST_CASE("clip_grad") {
    CHECK(clip_grad(vec({12.0, 16.0})).isApprox(vec({6.0, 8.0})));
    CHECK((clip_grad(vec({3.0, 4.0})).array() == vec({3.0, 4.0}).array()).all());
    CHECK(clip_grad(Vector::Zero(3)).norm() == 0.0);
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
        const Vector g = 30.0 * standard_normal(rng, 6);
        CHECK(clip_grad(g).norm() <= std::min(g.norm(), 10.0) * (1 + 1e-15));
    }
}

TEST_CASE("adam") {
    SUBCASE("first step is lr times the sign") {
        auto s = AdamState::make(2, 0.01);
        Vector th = vec({1.0, 1.0});
        adam_step(s, th, vec({2.0, -3.0}));
        CHECK(std::abs(th(0) - 0.99) <= 1e-6);
        CHECK(std::abs(th(1) - 1.01) <= 1e-6);
    }
    SUBCASE("zero gradient never moves") {
        auto s = AdamState::make(3, 0.01);
        Vector th = vec({0.5, -2.0, 7.0});
        const Vector start = th;
        for (int k = 0; k < 100; ++k) adam_step(s, th, Vector::Zero(3));
        CHECK((th.array() == start.array()).all());
    }
    SUBCASE("constant gradient steps do not grow") {
        auto s = AdamState::make(1, 0.01);
        Vector th = vec({0.0});
        adam_step(s, th, vec({2.0}));
        const double d1 = std::abs(th(0));
        const double before = th(0);
        adam_step(s, th, vec({2.0}));
        CHECK(std::abs(th(0) - before) <= d1 + 1e-9);
    }
    SUBCASE("size mismatch") {
        auto s = AdamState::make(2, 0.01);
        Vector th = vec({0.0, 0.0});
        CHECK_THROWS(adam_step(s, th, vec({1.0})));
    }
}

TEST_CASE("ARS hand example") {
    const grad::CostFn linear = [](const Vector& th) { return th(0); };
    const auto e = ars_estimate(linear, vec({0.3}), {vec({1.0})}, 0.01, 1e-8);
    CHECK(std::abs(e.sigma_r - 0.01) <= 1e-15);
    CHECK(e.grad(0) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK_FALSE(e.sigma_guarded);
}

TEST_CASE("ARS guard on constant and even costs") {
    const grad::CostFn flat = [](const Vector&) { return 4.0; };
    const auto deltas = ars_directions(5, 8, 3);
    const auto e = ars_estimate(flat, Vector::Zero(5), deltas, 0.01, 1e-8);
    CHECK(e.sigma_guarded);
    CHECK(e.sigma_r == 1.0);
    CHECK(e.grad.norm() == 0.0);

    const grad::CostFn sq = [](const Vector& th) { return th.squaredNorm(); };
    const auto q = ars_estimate(sq, Vector::Zero(5), deltas, 0.01, 1e-8);
    CHECK(q.grad.norm() == 0.0);
}

TEST_CASE("ARS on an affine cost") {
    // For J(th) = c'th + k the differences are exact, so the estimate equals
    // (1/m) sum (c'd) d / sigma_R. That vector is compared by cosine.
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Vector c = standard_normal(rng, 7);
        const grad::CostFn affine = [&](const Vector& th) { return c.dot(th) + 3.0; };
        const auto deltas = ars_directions(7, 40, seed);
        const Vector th0 = standard_normal(rng, 7);
        const auto e = ars_estimate(affine, th0, deltas, 0.01, 1e-8);
        Vector ref = Vector::Zero(7);
        for (const auto& d : deltas) ref += c.dot(d) * d;
        ref /= 40.0;
        CHECK(std::abs(e.grad.dot(ref) / (e.grad.norm() * ref.norm()) - 1.0) <= 1e-9);
        // Positive correlation with the true gradient.
        CHECK(e.grad.dot(c) > 0.0);
    }
    // A single direction along c gives the true direction exactly.
    const Vector c = vec({1.0, -2.0, 0.5});
    const grad::CostFn affine = [&](const Vector& th) { return c.dot(th); };
    const auto e = ars_estimate(affine, Vector::Zero(3), {c}, 0.01, 1e-8);
    CHECK(std::abs(e.grad.dot(c) / (e.grad.norm() * c.norm()) - 1.0) <= 1e-9);
}

TEST_CASE("ARS directions are seeded") {
    const auto a = ars_directions(4, 3, 7), b = ars_directions(4, 3, 7), c = ars_directions(4, 3, 8);
    for (int i = 0; i < 3; ++i) {
        CHECK((a[i].array() == b[i].array()).all());
        CHECK(!(a[i].array() == c[i].array()).all());
    }
    CHECK(ars_directions(4, 5, 7)[2] == a[2]);
}

TEST_CASE("ARS on a control problem stays bounded and matches ars_estimate") {
    const auto prob = small_problem();
    const auto batch = rollout::sample_batch(prob.sys, prob.task, 1, 3);
    ArsConfig cfg;
    cfg.m_dirs = 6;
    const Vector th = ren::RenTheta::random(prob.dims, 4).to_flat();
    const auto r = ars_gradient(prob, th, cfg, batch, 99);
    const grad::CostFn cost = [&](const Vector& t) { return grad::batch_cost(prob, t, batch); };
    const auto ref = ars_estimate(cost, th, ars_directions(th.size(), 6, 99), cfg.nu, cfg.sigma_floor);
    CHECK((r.estimate.grad - ref.grad).norm() <= 1e-12 * ref.grad.norm());
    CHECK(r.base_cost == doctest::Approx(cost(th)).epsilon(1e-14));
    CHECK(std::isfinite(r.perturbed_max_state));
    CHECK(r.perturbed_max_state <= 10.0 * r.base_max_state);
}

TEST_CASE("learning rate schedule") {
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.lr = 0.01;
    CHECK(cfg.drop_epoch() == 85);
    CHECK(cfg.lr_at(0) == 0.01);
    CHECK(cfg.lr_at(84) == 0.01);
    CHECK(cfg.lr_at(85) == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(cfg.lr_at(99) == cfg.lr_at(85));
    cfg.epochs = 7;
    CHECK(cfg.drop_epoch() == 6);
    cfg.epochs = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("normalization") {
    Baselines b{rollout::TaskKind::Lqg, 10.0, 2.0};
    CHECK(b.normalize(10.0) == 1.0);
    CHECK(b.normalize(2.0) == 0.0);
    CHECK(b.normalize(6.0) == 0.5);
    b.kind = rollout::TaskKind::InputConstrained;
    CHECK(b.normalize(5.0) == 0.5);
    CHECK(to_string(grad_mode_from_string("ars")) == "ars");
    CHECK_THROWS_AS(grad_mode_from_string("sgd"), ConfigError);
}

TEST_CASE("training loop") {
    const auto prob = small_problem();
    const auto test = rollout::sample_batch(prob.sys, prob.task, 77, 5);
    Baselines base{rollout::TaskKind::Lqg, 100.0, 0.0};
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.seed = 3;

    SUBCASE("zero epochs") {
        cfg.epochs = 0;
        const Vector th0 = initial_theta(prob, cfg);
        const auto run = train_loop(prob, cfg, test, base);
        REQUIRE(run.curve.size() == 1);
        CHECK((run.theta.array() == th0.array()).all());
        CHECK(run.curve[0].test_cost == grad::batch_cost(prob, th0, test));
    }
    SUBCASE("exact mode improves, is deterministic and checkpoints") {
        cfg.epochs = 10;
        std::vector<long> saved;
        const auto a = train_loop(prob, cfg, test, base, std::nullopt,
                                  [&](long e, const Vector&) { saved.push_back(e); });
        const auto b = train_loop(prob, cfg, test, base);
        REQUIRE(a.curve.size() == 11);
        for (std::size_t i = 0; i < a.curve.size(); ++i) {
            CHECK(a.curve[i].epoch == static_cast<long>(i));
            CHECK(a.curve[i].test_cost == b.curve[i].test_cost);
            CHECK(a.curve[i].train_cost == b.curve[i].train_cost);
            CHECK(a.curve[i].normalized_cost == a.curve[i].test_cost / 100.0);
        }
        CHECK((a.theta.array() == b.theta.array()).all());
        CHECK(a.curve.back().test_cost < a.curve.front().test_cost);
        CHECK(saved == std::vector<long>{9, 10});
    }
    SUBCASE("ars mode records the search") {
        cfg.epochs = 3;
        cfg.mode = GradMode::Ars;
        cfg.ars.m_dirs = 4;
        cfg.ars.b_batch = 2;
        const auto a = train_loop(prob, cfg, test, base);
        const auto b = train_loop(prob, cfg, test, base);
        CHECK(a.curve.size() == 4);
        REQUIRE(a.search.size() == 3);
        for (std::size_t i = 0; i < a.search.size(); ++i) {
            CHECK(a.search[i].perturbed_max_state == b.search[i].perturbed_max_state);
            CHECK(std::isfinite(a.search[i].perturbed_max_state));
        }
        CHECK((a.theta.array() == b.theta.array()).all());
    }
    SUBCASE("wrong initial length") {
        cfg.epochs = 1;
        CHECK_THROWS(train_loop(prob, cfg, test, base, Vector::Zero(3)));
    }
    SUBCASE("overflow names the epoch") {
        cfg.epochs = 2;
        auto fb = small_problem(youla::Arch::Feedback);
        auto th = ren::RenTheta::zeros(fb.dims);
        fb.out_scale = 1e200;  // the bound lives in the problem, not in the flat vector
        th.D22 << 0.0, 1.0;
        try {
            train_loop(fb, cfg, test, base, th.to_flat());
            FAIL("expected a numerical abort");
        } catch (const NumericalError& e) {
            CHECK(e.epoch() == 0);
        }
    }
}
