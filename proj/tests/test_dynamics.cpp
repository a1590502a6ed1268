#include <catch2/catch_amalgamated.hpp>

#include "empc/dynamics.hpp"
#include "empc/error.hpp"
#include "empc/mpc.hpp"
#include "test_util.hpp"

using namespace empc;

namespace {

Trajectory scalar_states(std::initializer_list<double> xs) {
    Trajectory t;
    for (double x : xs) t.states.push_back(Vector{x});
    t.inputs.assign(t.states.size() - 1, Vector{0.0});
    return t;
}

}  // namespace

TEST_CASE("step", "[dynamics]") {
    const LtiSystem trivial(Matrix::identity(2), Matrix(2, 1));
    CHECK(step(trivial, Vector{1, 2}, Vector{5}) == Vector{1, 2});

    const Scenario osc = builtin_scenario("oscillator");
    const Vector x1 = step(osc.system, Vector{1, 0}, Vector{0});
    CHECK(x1[0] == 0.5403);
    CHECK(x1[1] == 0.8415);

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const LtiSystem sys(empc::testing::random_matrix(rng, 3, 3), empc::testing::random_matrix(rng, 3, 2));
        const Vector x = empc::testing::random_vector(rng, 3), u = empc::testing::random_vector(rng, 2);
        const Vector got = step(sys, x, u);
        for (std::size_t i = 0; i < 3; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 3; ++j) acc += sys.A(i, j) * x[j];
            for (std::size_t j = 0; j < 2; ++j) acc += sys.B(i, j) * u[j];
            CHECK(got[i] == Catch::Approx(acc).margin(1e-14));
        }
    }
    CHECK_THROWS_AS(step(trivial, Vector{1}, Vector{0}), Error);
}

TEST_CASE("rollout", "[dynamics]") {
    const LtiSystem zero(Matrix(2, 2), Matrix(2, 1));
    const Trajectory t = rollout(zero, [](const Vector&) { return Vector{0.0}; }, Vector{3, -4}, 5);
    REQUIRE(t.states.size() == 6);
    REQUIRE(t.inputs.size() == 5);
    for (std::size_t k = 1; k < t.states.size(); ++k) CHECK(norm_inf(t.states[k]) == 0.0);

    const LtiSystem integrator(Matrix{{1}}, Matrix{{1}});
    const Trajectory d = rollout(integrator, [](const Vector& x) { return Vector{-x[0]}; }, Vector{0.7}, 4);
    for (std::size_t k = 1; k < d.states.size(); ++k) CHECK(d.states[k][0] == 0.0);

    auto failing = [](const Vector& x) -> Vector {
        if (x[0] < 0.5) fail(ErrorKind::Infeasible, "no input");
        return Vector{-0.3};
    };
    try {
        rollout(integrator, failing, Vector{1.0}, 10);
        FAIL("expected throw");
    } catch (const ControllerInfeasibleError& e) {
        CHECK(e.step() == 2);
    }
}

TEST_CASE("rollout with implicit MPC stays inside the oscillator constraints", "[dynamics]") {
    // N = 1 without a terminal set is not recursively feasible, so rollouts may
    // stop early; every state visited before that must still be admissible.
    const Scenario s = builtin_scenario("oscillator");
    const CondensedMpc m = condense(s);
    std::mt19937_64 rng(13);
    int checked = 0, completed = 0;
    while (checked < 50) {
        const Vector x0 = empc::testing::random_vector(rng, 2);
        if (!is_feasible(m, x0)) continue;
        ++checked;
        std::vector<Vector> visited;
        const Controller mpc = [&](const Vector& x) {
            visited.push_back(x);
            return mpc_control(m, x);
        };
        try {
            const Trajectory t = rollout(s.system, mpc, x0, s.k_end);
            ++completed;
            for (const auto& u : t.inputs) CHECK(norm_inf(u) <= 1.0 + 1e-8);
            for (std::size_t k = 0; k < t.inputs.size(); ++k)
                CHECK(empc::testing::max_abs_diff(step(s.system, t.states[k], t.inputs[k]), t.states[k + 1]) <= 1e-9);
            visited.push_back(t.states.back());
        } catch (const ControllerInfeasibleError& e) {
            CHECK(e.step() >= 1);  // x0 itself was feasible
        }
        for (const auto& x : visited) CHECK(norm_inf(x) <= 1.0 + 1e-8);
    }
}

TEST_CASE("zero-input rollout is bounded by the induced norm", "[dynamics][property]") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = empc::testing::random_matrix(rng, 3, 3);
        a *= 0.9 / std::max(norm_inf(a), 1e-12);
        const LtiSystem sys(a, Matrix(3, 1));
        const Vector x0 = empc::testing::random_vector(rng, 3);
        const Trajectory t = rollout(sys, [](const Vector&) { return Vector{0.0}; }, x0, 15);
        double bound = norm_inf(x0);
        for (const auto& x : t.states) {
            CHECK(norm_inf(x) <= bound + 1e-12);
            bound *= norm_inf(a);
        }
    }
}

TEST_CASE("builtin scenarios", "[dynamics]") {
    const Scenario osc = builtin_scenario("oscillator");
    CHECK(osc.system.A(0, 0) == 0.5403);
    CHECK(osc.nx() == 2);
    CHECK(osc.N == 1);
    CHECK(osc.R(0, 0) == 1.0);
    CHECK(max_abs(osc.Q - 2.0 * Matrix::identity(2)) == 0.0);
    CHECK(max_abs(osc.P) == 0.0);
    CHECK(!osc.Xf);

    const Scenario om = builtin_scenario("oscillating_masses");
    CHECK(om.system.B.col_vector(0) == Vector{0.014, 0.063, 0.221, 0.367});
    CHECK(om.N == 7);
    CHECK(om.U.contains(Vector{0.5}));
    CHECK(!om.U.contains(Vector{0.51}));
    CHECK(om.X.contains(Vector{4, 10, -4, -10}));
    CHECK(!om.X.contains(Vector{4.01, 0, 0, 0}));

    const Scenario ip = builtin_scenario("inverted_pendulum");
    CHECK(ip.system.A(3, 2) == 3.1182);
    CHECK(ip.N == 10);
    CHECK(ip.X.contains(Vector{1, 1.5, 0.35, 1.0}));
    CHECK(!ip.X.contains(Vector{0, 0, 0.36, 0}));

    for (const auto& name : builtin_scenario_names()) CHECK_NOTHROW(builtin_scenario(name).validate());
    try {
        builtin_scenario("segway");
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownScenario);
    }
}

TEST_CASE("settling_time", "[dynamics]") {
    CHECK(settling_time(scalar_states({0, 0, 0}), 1e-2) == std::optional<std::size_t>(0));
    CHECK(settling_time(scalar_states({1, 0.005, 0.003}), 1e-2) == std::optional<std::size_t>(1));
    CHECK(settling_time(scalar_states({1, 0.005, 0.02, 0.001}), 1e-2) == std::optional<std::size_t>(3));
    CHECK(!settling_time(scalar_states({1, 0.5, 0.2}), 1e-2));
}

TEST_CASE("settling_time is monotone in tol", "[dynamics][property]") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        Trajectory t;
        for (int k = 0; k < 12; ++k) t.states.push_back(empc::testing::random_vector(rng, 2, -0.05, 0.05));
        t.inputs.assign(11, Vector{0.0});
        const auto a = settling_time(t, 0.01), b = settling_time(t, 0.03);
        if (a) {
            REQUIRE(b);
            CHECK(*b <= *a);
        }
    }
}

TEST_CASE("average settling time and rAST", "[dynamics]") {
    const std::vector<Trajectory> set{scalar_states({1, 1, 0, 0}), scalar_states({1, 1, 1, 1, 0})};
    CHECK(average_settling_time(set, 1e-2) == 3.0);
    CHECK(relative_ast(average_settling_time(set, 1e-2), average_settling_time(set, 1e-2)) == 1.0);

    // An unsettled trajectory counts as its length in steps.
    const std::vector<Trajectory> unsettled{scalar_states({1, 1, 1})};
    CHECK(average_settling_time(unsettled, 1e-2) == 2.0);

    const std::vector<std::optional<std::size_t>> times{2, std::nullopt};
    CHECK(average_settling_time(times, 10) == 6.0);
    CHECK_THROWS_AS(average_settling_time(std::span<const Trajectory>{}, 1e-2), Error);
}
