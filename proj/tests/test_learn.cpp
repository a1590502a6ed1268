#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "empc/error.hpp"
#include "empc/learn.hpp"
#include "empc/mpqp.hpp"
#include "test_util.hpp"

using namespace empc;

namespace {

Dataset from_function(std::size_t n, std::size_t nx, std::uint64_t seed, auto&& f) {
    std::mt19937_64 rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        Vector x = empc::testing::random_vector(rng, nx);
        Vector u = f(x);
        d.points.push_back({std::move(x), std::move(u)});
    }
    return d;
}

double relative_error(const Vector& a, const Vector& b) {
    return norm2(sub(a, b)) / std::max({norm2(a), norm2(b), 1e-300});
}

}  // namespace

TEST_CASE("flatten round trip and init", "[learn]") {
    const ReluNetwork n = init_network(3, 2, 5, 2, 11);
    CHECK(n.width() == 5);
    CHECK(n.depth() == 2);
    CHECK(flatten(n).size() == param_count(n));
    ReluNetwork m = n;
    unflatten(m, flatten(n));
    CHECK(flatten(m) == flatten(n));
    const double limit = std::sqrt(6.0 / 8.0);
    for (double w : n.layers[0].W.data()) CHECK(std::abs(w) <= limit);
    CHECK(flatten(init_network(3, 2, 5, 2, 11)) == flatten(n));
    CHECK(flatten(init_network(3, 2, 5, 2, 12)) != flatten(n));
}

TEST_CASE("backprop matches central differences", "[learn][property]") {
    struct Arch {
        std::size_t nx, M, L, nu;
    };
    std::size_t trial = 0;
    for (const Arch& a : {Arch{2, 3, 1, 1}, Arch{3, 6, 3, 2}, Arch{4, 6, 6, 1}}) {
        const Dataset d = from_function(16, a.nx, 100 + a.M, [&](const Vector& x) {
            Vector u(a.nu);
            for (std::size_t i = 0; i < a.nu; ++i) u[i] = std::sin(x[0] + static_cast<double>(i)) + x.back();
            return u;
        });
        for (int k = 0; k < 7; ++k, ++trial) {
            ReluNetwork n = init_network(a.nx, a.nu, a.M, a.L, trial);
            std::mt19937_64 rng(trial);
            for (auto& layer : n.layers)
                for (double& b : layer.b) b = uniform(rng, -0.5, 0.5);
            Vector grad;
            mse_gradient(n, d.points, grad);
            CHECK(relative_error(grad, finite_difference_gradient(n, d.points, 1e-5)) <= 1e-4);
        }
    }
}

TEST_CASE("adam_update", "[learn]") {
    TrainConfig cfg;
    const Vector p{1.0, -2.0};
    SECTION("zero gradient leaves parameters unchanged") {
        const AdamStep fresh = adam_update(p, Vector{0, 0}, AdamState{}, cfg);
        CHECK(fresh.params == p);
        CHECK(fresh.state.m == Vector{0, 0});
        CHECK(fresh.state.t == 1);
        // With history the moments decay geometrically.
        AdamState s{Vector{0.5, -0.5}, Vector{0.1, 0.2}, 3};
        const AdamStep step = adam_update(p, Vector{0, 0}, s, cfg);
        CHECK(step.state.m[0] == Catch::Approx(0.45));
        CHECK(step.state.v[1] == Catch::Approx(0.2 * 0.999));
        CHECK(step.state.t == 4);
    }
    SECTION("first step from zero state") {
        const Vector g{0.3, -4.0};
        const AdamStep step = adam_update(p, g, AdamState{}, cfg);
        for (std::size_t i = 0; i < 2; ++i) {
            // m̂ = g, v̂ = g²: Δ = −lr·g/(|g| + eps)
            const double want = -cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.eps);
            CHECK(step.params[i] - p[i] == Catch::Approx(want).epsilon(1e-9));
        }
    }
    SECTION("constant gradient converges to lr-sized steps") {
        Vector params = p;
        AdamState s;
        for (int k = 0; k < 2000; ++k) {
            AdamStep step = adam_update(params, Vector{0.7, -0.01}, s, cfg);
            if (k == 1999) {
                CHECK(step.params[0] - params[0] == Catch::Approx(-cfg.learning_rate).epsilon(1e-6));
                CHECK(step.params[1] - params[1] == Catch::Approx(cfg.learning_rate).epsilon(1e-4));
            }
            params = std::move(step.params);
            s = std::move(step.state);
        }
    }
}

TEST_CASE("train_mlp", "[learn]") {
    SECTION("constant target") {
        Dataset d;
        for (int i = 0; i < 32; ++i) d.points.push_back({Vector{0.3, -0.5}, Vector{0.7}});
        TrainConfig cfg;
        cfg.epochs = 200;
        const TrainResult r = train_mlp(d, cfg);
        CHECK(r.final_mse <= 1e-6);
        CHECK(r.loss_history.size() == 200);
    }
    SECTION("linear target") {
        const Dataset d = from_function(2000, 2, 5, [](const Vector& x) { return Vector{1.5 * x[0] - 0.5 * x[1]}; });
        TrainConfig cfg;
        cfg.M = 2;
        cfg.L = 1;
        cfg.epochs = 60;
        cfg.learning_rate = 1e-2;
        cfg.seed = 3;
        const TrainResult r = train_mlp(d, cfg);
        CHECK(r.final_mse <= 1e-4);
        CHECK(r.final_mse == mse(r.net, d.points));
        for (double l : r.loss_history) CHECK(std::isfinite(l));

        const TrainResult again = train_mlp(d, cfg);
        CHECK(flatten(again.net) == flatten(r.net));
        CHECK(again.loss_history == r.loss_history);
    }
    SECTION("divergence is reported") {
        const Dataset d = from_function(64, 2, 6, [](const Vector& x) { return Vector{1e200 * x[0]}; });
        TrainConfig cfg;
        cfg.M = 2;
        cfg.L = 1;
        cfg.epochs = 5;
        cfg.standardize = false;
        try {
            train_mlp(d, cfg);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NonFiniteLoss);
        }
    }
    SECTION("config validation") {
        const Dataset d = from_function(8, 3, 1, [](const Vector&) { return Vector{0.0}; });
        TrainConfig cfg;
        cfg.M = 2;
        CHECK_THROWS_AS(train_mlp(d, cfg), Error);
    }
}

TEST_CASE("polynomial baseline", "[learn]") {
    SECTION("memory of the degree-3 baseline") {
        Polynomial p{3, 4, 1, Matrix(1, 256)};
        CHECK(p.num_terms() == 256);
        CHECK(memory_footprint_poly(p, 8) == 2048);
        CHECK(format_kb(memory_footprint_poly(p, 8)) == "2.00");
    }
    SECTION("exact affine data") {
        const Dataset d = from_function(200, 2, 9, [](const Vector& x) { return Vector{3 * x[0] + 1}; });
        const Polynomial p = fit_polynomial(d, 1);
        // Terms: 1, x1, x2, x1·x2
        CHECK(p.coeffs(0, 0) == Catch::Approx(1.0).margin(1e-8));
        CHECK(p.coeffs(0, 1) == Catch::Approx(3.0).margin(1e-8));
        CHECK(std::abs(p.coeffs(0, 2)) <= 1e-8);
        CHECK(std::abs(p.coeffs(0, 3)) <= 1e-8);
    }
    SECTION("constant data") {
        const Dataset d = from_function(100, 2, 10, [](const Vector&) { return Vector{-0.25}; });
        const Polynomial p = fit_polynomial(d, 2);
        CHECK(p.coeffs(0, 0) == Catch::Approx(-0.25).margin(1e-10));
        for (std::size_t m = 1; m < p.num_terms(); ++m) CHECK(std::abs(p.coeffs(0, m)) <= 1e-9);
    }
    SECTION("residual is orthogonal to the design") {
        const Dataset d = from_function(300, 2, 11, [](const Vector& x) { return Vector{std::exp(x[0]) * x[1]}; });
        const Polynomial p = fit_polynomial(d, 3);
        Vector normal(p.num_terms(), 0.0);
        for (const auto& pt : d.points) {
            const double r = poly_eval(p, pt.x)[0] - pt.u[0];
            const Vector m = monomials(pt.x, 3);
            for (std::size_t k = 0; k < m.size(); ++k) normal[k] += m[k] * r;
        }
        CHECK(norm_inf(normal) <= 1e-7);
    }
    SECTION("too little data") {
        const Dataset d = from_function(10, 2, 12, [](const Vector&) { return Vector{0.0}; });
        try {
            fit_polynomial(d, 3);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::RankDeficient);
        }
    }
}

TEST_CASE("fit_pwa_gains", "[learn]") {
    SECTION("self-consistent data recovers the gains") {
        Scenario s = builtin_scenario("oscillator");
        const CondensedMpc m = condense(s);
        const ExplicitLaw law = enumerate_explicit(m);
        const Dataset d = generate_dataset(m, 2000, 4, s.sample_box);
        PwaFunction perturbed = law.law;
        for (auto& r : perturbed.regions) r.g[0] += 0.1;
        Dataset relabeled = d;
        for (auto& p : relabeled.points) p.u = eval_pwa(law.law, p.x);
        const PwaRefit fit = fit_pwa_gains(perturbed, relabeled);
        for (std::size_t r = 0; r < law.law.regions.size(); ++r) {
            if (fit.counts[r] < 3) continue;
            CHECK(max_abs(fit.law.regions[r].K - law.law.regions[r].K) <= 1e-7);
            CHECK(std::abs(fit.law.regions[r].g[0] - law.law.regions[r].g[0]) <= 1e-7);
        }
    }
    SECTION("single region is a global affine fit") {
        PwaFunction one;
        one.nx = 2;
        one.nu = 1;
        one.regions.push_back({Polytope::box(Vector{-1, -1}, Vector{1, 1}), Matrix(1, 2), Vector{0.0}});
        const Dataset d = from_function(100, 2, 13, [](const Vector& x) { return Vector{x[0] * x[0] + x[1]}; });
        const PwaRefit fit = fit_pwa_gains(one, d);
        Matrix design(100, 3);
        Vector target(100);
        for (std::size_t i = 0; i < 100; ++i) {
            design(i, 0) = d.points[i].x[0];
            design(i, 1) = d.points[i].x[1];
            design(i, 2) = 1.0;
            target[i] = d.points[i].u[0];
        }
        const Vector oracle = lu_solve(transpose_times(design, design), transpose_times(design, target));
        CHECK(fit.law.regions[0].K(0, 0) == Catch::Approx(oracle[0]).margin(1e-10));
        CHECK(fit.law.regions[0].K(0, 1) == Catch::Approx(oracle[1]).margin(1e-10));
        CHECK(fit.law.regions[0].g[0] == Catch::Approx(oracle[2]).margin(1e-10));
    }
    SECTION("short-horizon partition refit to long-horizon labels") {
        Scenario s1 = builtin_scenario("oscillator");
        Scenario s3 = s1;
        s3.N = 3;
        const ExplicitLaw law = enumerate_explicit(condense(s1));
        const Dataset d = generate_dataset(condense(s3), 2000, 8, s3.sample_box);
        const PwaRefit fit = fit_pwa_gains(law.law, d);
        CHECK(pwa_objective(fit.law, d) <= pwa_objective(law.law, d));
    }
    SECTION("underpopulated regions keep their prior") {
        PwaFunction two;
        two.nx = 1;
        two.nu = 1;
        two.regions.push_back({Polytope(Matrix{{1}, {-1}}, Vector{0, 1}), Matrix{{5}}, Vector{5}});
        two.regions.push_back({Polytope(Matrix{{-1}, {1}}, Vector{0, 1}), Matrix{{7}}, Vector{7}});
        Dataset d;
        d.points.push_back({Vector{0.5}, Vector{1.0}});
        const PwaRefit fit = fit_pwa_gains(two, d);
        CHECK(fit.kept_prior == 2);
        CHECK(fit.law.regions[1].K(0, 0) == 7);
    }
}

TEST_CASE("project_feasible", "[learn]") {
    const LtiSystem sys(Matrix::identity(2), Matrix{{1, 0}, {0, 1}});
    const Polytope box = Polytope::symmetric_box(Vector{0.5, 0.5});
    CHECK(project_feasible(Vector{0.7, -0.2}, Vector{0, 0}, sys, box) == Vector{0.5, -0.2});
    CHECK(project_feasible(Vector{0.1, -0.2}, Vector{0, 0}, sys, box) == Vector{0.1, -0.2});

    SECTION("clamp and QP paths agree") {
        std::mt19937_64 rng(5);
        const Polytope big = Polytope::symmetric_box(Vector{10, 10});  // C_inv that never binds
        for (int i = 0; i < 50; ++i) {
            const Vector u = empc::testing::random_vector(rng, 2, -2, 2);
            const Vector clamp = project_feasible(u, Vector{0, 0}, sys, box);
            const Vector qp = project_feasible(u, Vector{0, 0}, sys, box, big);
            CHECK(empc::testing::max_abs_diff(clamp, qp) <= 1e-8);
        }
    }
    SECTION("simplex against a grid projection") {
        const Polytope simplex(Matrix{{1, 1}, {-1, 0}, {0, -1}}, Vector{1, 0, 0});
        std::mt19937_64 rng(6);
        for (int trial = 0; trial < 10; ++trial) {
            const Vector u = empc::testing::random_vector(rng, 2, -1, 2);
            const Vector proj = project_feasible(u, Vector{0, 0}, sys, simplex);
            CHECK(simplex.max_violation(proj) <= 1e-8);
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i <= 1000; ++i)
                for (int j = 0; i + j <= 1000; ++j) {
                    const double dx = 1e-3 * i - u[0], dy = 1e-3 * j - u[1];
                    best = std::min(best, dx * dx + dy * dy);
                }
            const double d2 = std::pow(proj[0] - u[0], 2) + std::pow(proj[1] - u[1], 2);
            CHECK(d2 <= best + 1e-12);
        }
    }
    SECTION("invariant-set constraint") {
        const LtiSystem scalar(Matrix{{1}}, Matrix{{1}});
        const Polytope U = Polytope::symmetric_box(Vector{1});
        const Polytope cinv = Polytope::symmetric_box(Vector{0.5});
        // Next state x + u must stay in [-0.5, 0.5].
        CHECK(project_feasible(Vector{0.4}, Vector{0.3}, scalar, U, cinv)[0] == Catch::Approx(0.2).margin(1e-9));
        CHECK_THROWS_AS(project_feasible(Vector{0.0}, Vector{0.9}, scalar, U, cinv), Error);
        const Polytope tight = Polytope::symmetric_box(Vector{0.1});
        const Polytope cinv2 = Polytope::symmetric_box(Vector{2.0});
        try {
            project_feasible(Vector{0.0}, Vector{1.95}, LtiSystem(Matrix{{2}}, Matrix{{1}}), tight, cinv2);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ProjectionInfeasible);
        }
    }
}
