#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "empc/error.hpp"
#include "empc/mpqp.hpp"
#include "empc/relunet.hpp"
#include "test_util.hpp"

using namespace empc;

namespace {

ReluNetwork random_network(std::mt19937_64& rng, std::size_t nx, std::size_t M, std::size_t L, std::size_t nu) {
    ReluNetwork n;
    std::size_t in = nx;
    for (std::size_t l = 0; l <= L; ++l) {
        const std::size_t out = l == L ? nu : M;
        n.layers.push_back({empc::testing::random_matrix(rng, out, in), empc::testing::random_vector(rng, out)});
        in = out;
    }
    return n;
}

// Independent forward pass over raw arrays.
Vector reference_forward(const ReluNetwork& n, const Vector& x) {
    std::vector<double> v = x;
    for (std::size_t l = 0; l < n.layers.size(); ++l) {
        const auto& W = n.layers[l].W;
        std::vector<double> y(W.rows());
        for (std::size_t i = 0; i < W.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < W.cols(); ++j) acc += W(i, j) * v[j];
            acc += n.layers[l].b[i];
            y[i] = (l + 1 < n.layers.size() && acc < 0.0) ? 0.0 : acc;
        }
        v = y;
    }
    return v;
}

ConvexPwa random_pieces(std::mt19937_64& rng, std::size_t nx, std::size_t count) {
    ConvexPwa f;
    for (std::size_t i = 0; i < count; ++i)
        f.pieces.push_back({empc::testing::random_vector(rng, nx, -3, 3), uniform(rng, -2, 2)});
    return f;
}

}  // namespace

TEST_CASE("eval_network", "[relunet]") {
    ReluNetwork zero{{{Matrix(3, 2), Vector(3, 0.0)}, {Matrix(1, 3), Vector(1, 0.0)}}};
    CHECK(eval_network(zero, Vector{1, -1}) == Vector{0.0});

    ReluNetwork single{{{Matrix{{1, 0}, {0, 1}}, Vector{0, 0}}, {Matrix{{1, 0}}, Vector{0}}}};
    CHECK(eval_network(single, Vector{-0.3, 2})[0] == 0.0);
    CHECK(eval_network(single, Vector{0.7, 2})[0] == 0.7);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const ReluNetwork n = random_network(rng, 3, 5, 1 + trial % 4, 2);
        const Vector x = empc::testing::random_vector(rng, 3);
        CHECK(eval_network(n, x) == reference_forward(n, x));
    }
    CHECK_THROWS_AS(eval_network(single, Vector{1}), Error);
}

TEST_CASE("networks are locally affine", "[relunet][property]") {
    std::mt19937_64 rng(2);
    const ReluNetwork n = random_network(rng, 2, 6, 3, 1);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Vector x = empc::testing::random_vector(rng, 2);
        const Vector d = scale(empc::testing::random_vector(rng, 2), 1e-7);
        const double f0 = eval_network(n, x)[0];
        const double f1 = eval_network(n, add(x, d))[0];
        const double f2 = eval_network(n, add(x, scale(d, 2.0)))[0];
        // Same activation pattern along a tiny segment almost surely: equal increments.
        if (std::abs((f2 - f1) - (f1 - f0)) <= 1e-12) ++checked;
    }
    CHECK(checked >= 195);
}

TEST_CASE("memory formula reproduces the benchmark table", "[relunet]") {
    struct Row {
        std::size_t M, L, params;
        const char* kb;
    };
    for (const Row& r : {Row{6, 6, 247, "1.93"}, Row{43, 1, 259, "2.02"}, Row{10, 6, 611, "4.77"},
                         Row{120, 1, 721, "5.63"}}) {
        CHECK(param_count(4, 1, r.M, r.L) == r.params);
        std::mt19937_64 rng(r.M);
        const ReluNetwork n = random_network(rng, 4, r.M, r.L, 1);
        std::size_t stored = 0;
        for (const auto& layer : n.layers) stored += layer.W.data().size() + layer.b.size();
        CHECK(param_count(n) == stored);
        CHECK(stored == r.params);
        CHECK(memory_footprint_net(n, 8) == 8 * r.params);
        CHECK(format_kb(memory_footprint_net(n, 8)) == r.kb);
    }
}

TEST_CASE("region_lower_bound", "[relunet]") {
    CHECK(region_lower_bound(2, 10, 1) == 2);
    CHECK(region_lower_bound(2, 10, 2) == 100);
    BigInt prev = region_lower_bound(2, 10, 1);
    for (std::size_t L = 2; L <= 50; ++L) {
        const BigInt cur = region_lower_bound(2, 10, L);
        CHECK(cur > prev);
        CHECK(cur >= 25 * prev);
        prev = cur;
    }
    // Nondecreasing in M.
    for (std::size_t M = 2; M < 30; ++M) CHECK(region_lower_bound(2, M + 1, 4) >= region_lower_bound(2, M, 4));
    CHECK_THROWS_AS(region_lower_bound(3, 2, 1), Error);
}

TEST_CASE("build_max_network", "[relunet]") {
    SECTION("single piece") {
        const ReluNetwork n = build_max_network(ConvexPwa{{{Vector{1, 0}, 0.0}}});
        CHECK(n.width() == 3);
        CHECK(n.depth() == 1);
        for (const Vector& x : {Vector{0, 0}, Vector{0.3, 0.9}, Vector{1, 1}})
            CHECK(eval_network(n, x)[0] == Catch::Approx(x[0]).margin(1e-12));
    }
    SECTION("tent complement") {
        const ReluNetwork n = build_max_network(ConvexPwa{{{Vector{1}, 0.0}, {Vector{-1}, 1.0}}});
        CHECK(eval_network(n, Vector{0.5})[0] == Catch::Approx(0.5).margin(1e-12));
        CHECK(eval_network(n, Vector{0.0})[0] == Catch::Approx(1.0).margin(1e-12));
        CHECK(eval_network(n, Vector{1.0})[0] == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("random pieces against the brute-force max") {
        std::mt19937_64 rng(6);
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t nx = 1 + trial % 3;
            const ConvexPwa f = random_pieces(rng, nx, 6);
            const ReluNetwork n = build_max_network(f);
            CHECK(n.width() == nx + 1);
            CHECK(n.depth() == 6);
            for (int i = 0; i < 2000; ++i) {
                const Vector x = empc::testing::random_vector(rng, nx, 0, 1);
                CHECK(std::abs(eval_network(n, x)[0] - f.value(x)) <= 1e-9);
            }
            for (int i = 0; i < 300; ++i) {
                const Vector x = empc::testing::random_vector(rng, nx, 0, 1);
                const Vector y = empc::testing::random_vector(rng, nx, 0, 1);
                const double mid = eval_network(n, scale(add(x, y), 0.5))[0];
                CHECK(mid <= 0.5 * (eval_network(n, x)[0] + eval_network(n, y)[0]) + 1e-9);
            }
        }
    }
    SECTION("empty input") {
        try {
            build_max_network(ConvexPwa{});
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::EmptyPieces);
        }
    }
}

TEST_CASE("exact_mpc_network", "[relunet]") {
    SECTION("affine law") {
        PwaFunction f;
        f.nx = 2;
        f.nu = 1;
        f.regions.push_back({Polytope::box(Vector{-1, -1}, Vector{1, 1}), Matrix{{0.3, -0.2}}, Vector{0.1}});
        const Box box{{-1, -1}, {1, 1}};
        const ExactRepresentation rep = exact_mpc_network(f, box, Box{{-1}, {1}});
        CHECK(rep.pairs[0].first.depth() == 1);
        CHECK(rep.pairs[0].second.depth() == 1);
        CHECK(max_sampled_error(f, rep, box, 2000).max_error <= 1e-9);
    }
    SECTION("oscillator law") {
        const Scenario s = builtin_scenario("oscillator");
        const ExplicitLaw law = enumerate_explicit(condense(s));
        const ExactRepresentation rep = exact_mpc_network(law.law, s.sample_box, Box{{-1}, {1}});
        for (const auto& [g, e] : rep.pairs) {
            CHECK(g.width() == 3);
            CHECK(e.width() == 3);
        }
        const ProxError err = max_sampled_error(law.law, rep, s.sample_box);
        CHECK(err.points > 1000);
        CHECK(err.max_error < 1e-3);
        CHECK(err.max_error <= 1e-6);
    }
    SECTION("random tiny mpQP") {
        std::mt19937_64 rng(12);
        for (int trial = 0; trial < 3; ++trial) {
            Scenario s = builtin_scenario("oscillator");
            s.system = LtiSystem(empc::testing::random_matrix(rng, 2, 2), empc::testing::random_matrix(rng, 2, 1));
            s.N = 2;
            s.P = Matrix::identity(2);
            const ExplicitLaw law = enumerate_explicit(condense(s));
            const ExactRepresentation rep = exact_mpc_network(law.law, s.sample_box, Box{{-1}, {1}});
            CHECK(max_sampled_error(law.law, rep, s.sample_box, 3000).max_error <= 1e-6);
        }
    }
}

TEST_CASE("halton points", "[relunet]") {
    CHECK(halton_point(1, 2) == Vector{0.5, 1.0 / 3.0});
    CHECK(halton_point(3, 1)[0] == 0.75);
    CHECK(halton_point(5, 2)[0] == empc::testing::radical_inverse(5, 2));
}
