#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "empc/error.hpp"
#include "empc/verify.hpp"
#include "test_util.hpp"

using namespace empc;

namespace {

Scenario shift_register() {
    Scenario s;
    s.name = "shift";
    s.system = LtiSystem(Matrix{{0, 1}, {0, 0}}, Matrix{{0}, {1}});
    s.Q = Matrix::identity(2);
    s.R = Matrix{{1}};
    s.P = Matrix(2, 2);
    s.X = Polytope::symmetric_box(Vector{1, 1});
    s.U = Polytope::symmetric_box(Vector{1});
    s.sample_box = {{-1, -1}, {1, 1}};
    s.k_end = 10;
    return s;
}

// Loop oracle: checks each constraint row of each step separately.
int loop_label(const Trajectory& t, const Polytope& X, const Polytope& U) {
    auto ok = [](const Polytope& P, const Vector& v) {
        for (std::size_t r = 0; r < P.num_rows(); ++r) {
            double lhs = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) lhs += P.C(r, j) * v[j];
            if (lhs > P.c[r] + kLabelTol) return false;
        }
        return true;
    };
    for (const auto& x : t.states)
        if (!ok(X, x)) return -1;
    for (const auto& u : t.inputs)
        if (!ok(U, u)) return -1;
    return 1;
}

// Brute-force min trace over a grid of (e11, e12); e22 is then the smallest
// feasible value, which is available in closed form.
double grid_min_trace(const std::vector<Vector>& pts, double rhs, double floor, double lim, double h) {
    double best = std::numeric_limits<double>::infinity();
    for (double e11 = floor; e11 <= lim; e11 += h) {
        for (double e12 = -lim; e12 <= lim; e12 += h) {
            double e22 = floor;
            if (e11 - floor > 0.0) e22 = std::max(e22, floor + e12 * e12 / (e11 - floor));
            else if (e12 != 0.0) continue;
            bool ok = true;
            for (const auto& x : pts) {
                const double partial = x[0] * x[0] * e11 + 2 * x[0] * x[1] * e12;
                if (x[1] == 0.0) {
                    if (partial < rhs) ok = false;
                } else {
                    e22 = std::max(e22, (rhs - partial) / (x[1] * x[1]));
                }
            }
            if (ok) best = std::min(best, e11 + e22);
        }
    }
    return best;
}

}  // namespace

TEST_CASE("mtl_label", "[verify]") {
    const Polytope X = Polytope::symmetric_box(Vector{1, 1});
    const Polytope U = Polytope::symmetric_box(Vector{1});
    Trajectory zero{{Vector{0, 0}, Vector{0, 0}}, {Vector{0}}};
    CHECK(mtl_label(zero, X, U) == 1);
    Trajectory bad = zero;
    bad.states[1][0] = 1.0001;
    CHECK(mtl_label(bad, X, U) == -1);
    Trajectory bad_input = zero;
    bad_input.inputs[0][0] = -1.5;
    CHECK(mtl_label(bad_input, X, U) == -1);

    std::mt19937_64 rng(3);
    int negatives = 0;
    for (int trial = 0; trial < 500; ++trial) {
        Trajectory t;
        for (int k = 0; k < 6; ++k) t.states.push_back(empc::testing::random_vector(rng, 2, -1.05, 1.05));
        for (int k = 0; k < 5; ++k) t.inputs.push_back(empc::testing::random_vector(rng, 1, -1.2, 1.2));
        const int want = loop_label(t, X, U);
        negatives += want < 0;
        CHECK(mtl_label(t, X, U) == want);
    }
    CHECK(negatives > 50);
    CHECK(negatives < 500);
}

TEST_CASE("generate_labeled_sets", "[verify]") {
    const Scenario s = shift_register();
    const LabelSizes sizes{50, 40, 60};
    SECTION("stable controller stays inside") {
        const Controller zero = [](const Vector&) { return Vector{0.0}; };
        const LabeledSets sets = generate_labeled_sets(zero, s, sizes, 7, "zero");
        CHECK(sets.G.points.size() == 50);
        CHECK(sets.T.points.size() == 40);
        CHECK(sets.V.points.size() == 60);
        CHECK(sets.T.count(1) == 40);
        CHECK(sets.V.count(-1) == 0);
    }
    SECTION("input violations") {
        const Controller loud = [](const Vector&) { return Vector{2.0}; };
        const LabeledSets sets = generate_labeled_sets(loud, s, sizes, 7, "loud");
        CHECK(sets.G.count(-1) == 50);
        CHECK(sets.V.count(1) == 0);
    }
    SECTION("failing controllers label -1") {
        const Controller picky = [](const Vector& x) {
            if (x[0] > 0.5) fail(ErrorKind::Infeasible, "picky");
            return Vector{0.0};
        };
        const LabeledSets sets = generate_labeled_sets(picky, s, sizes, 7, "picky");
        for (const auto& p : sets.V.points) {
            // x_1 = (x0_2, 0) so the controller also sees x0_2.
            const bool fails = p.x0[0] > 0.5 || p.x0[1] > 0.5;
            CHECK(p.label == (fails ? -1 : 1));
        }
    }
    SECTION("shared initial states") {
        const Controller a = [](const Vector&) { return Vector{0.0}; };
        const Controller b = [](const Vector& x) { return Vector{-x[1]}; };
        const LabeledSets sa = generate_labeled_sets(a, s, sizes, 11, "a");
        const LabeledSets sb = generate_labeled_sets(b, s, sizes, 11, "b", Exec::Serial);
        for (std::size_t i = 0; i < sizes.t; ++i) CHECK(sa.T.points[i].x0 == sb.T.points[i].x0);
        CHECK(sa.G.points[0].x0 != sa.T.points[0].x0);
        const LabeledSets other = generate_labeled_sets(a, s, sizes, 12, "a");
        CHECK(other.T.points[0].x0 != sa.T.points[0].x0);
        for (const auto& p : sa.T.points)
            for (std::size_t j = 0; j < 2; ++j) CHECK((p.x0[j] >= -1 && p.x0[j] <= 1));
    }
    CHECK_THROWS_AS(generate_labeled_sets([](const Vector&) { return Vector{0.0}; }, s, {0, 1, 1}, 1, ""), Error);
}

TEST_CASE("fit_ellipsoid", "[verify]") {
    EllipsoidOptions opt;
    opt.epsilon = 0.0;
    SECTION("no invalid points") {
        CHECK(max_abs(fit_ellipsoid(2, {}, opt).E) == 0.0);
    }
    SECTION("single point, degenerate slab") {
        const std::vector<Vector> pts{{2, 0}};
        const EllipsoidSafeSet s = fit_ellipsoid(2, pts, opt);
        CHECK(max_abs(s.E - Matrix{{0.25, 0}, {0, 0}}) <= 1e-6);
        CHECK(s.E(0, 0) + s.E(1, 1) == Catch::Approx(0.25).margin(1e-6));
    }
    SECTION("single point with eigenvalue floor") {
        const std::vector<Vector> pts{{2, 0}};
        opt.floor = 0.01;
        const EllipsoidSafeSet s = fit_ellipsoid(2, pts, opt);
        CHECK(max_abs(s.E - Matrix{{0.25, 0}, {0, 0.01}}) <= 1e-6);
    }
    SECTION("point at the origin") {
        const std::vector<Vector> pts{{1, 1}, {0, 0}};
        try {
            fit_ellipsoid(2, pts, opt);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InfeasibleMargin);
        }
    }
    SECTION("random point clouds against a grid oracle") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 6; ++trial) {
            std::vector<Vector> pts;
            for (int k = 0; k < 8; ++k) {
                Vector x = empc::testing::random_vector(rng, 2, -2, 2);
                if (norm2(x) < 0.8) x = scale(x, 0.8 / norm2(x));
                pts.push_back(x);
            }
            opt.epsilon = 0.05;
            opt.floor = trial % 2 ? 0.02 : 0.0;
            const EllipsoidSafeSet s = fit_ellipsoid(2, pts, opt);
            CHECK(max_abs(s.E - s.E.transpose()) == 0.0);
            CHECK(sym_eig(s.E).values[1] >= opt.floor - 1e-9);
            for (const auto& x : pts) {
                CHECK(dot(x, s.E * x) >= 1.05 - 1e-6);
                CHECK_FALSE(ellipsoid_contains(s, x));
            }
            const double trace = s.E(0, 0) + s.E(1, 1);
            const double grid = grid_min_trace(pts, 1.05, opt.floor, 2.0, 2e-3);
            CHECK(trace <= grid + 1e-9);
            CHECK(trace >= 0.99 * grid - 1e-2);
        }
    }
    SECTION("higher dimension keeps constraints") {
        std::mt19937_64 rng(9);
        std::vector<Vector> pts;
        for (int k = 0; k < 300; ++k) pts.push_back(empc::testing::random_vector(rng, 4, -3, 3));
        opt.epsilon = 0.05;
        opt.floor = 1e-6;
        const EllipsoidSafeSet s = fit_ellipsoid(4, pts, opt);
        for (const auto& x : pts) CHECK(dot(x, s.E * x) >= 1.05 - 1e-6);
        CHECK(sym_eig(s.E).values[3] >= 1e-6 - 1e-9);
    }
}

TEST_CASE("ellipsoid_contains", "[verify]") {
    std::mt19937_64 rng(10);
    const EllipsoidSafeSet unit{Matrix::identity(2), 0.0};
    CHECK(ellipsoid_contains(unit, Vector{0, 0}));
    CHECK(ellipsoid_contains(unit, Vector{1, 0}));
    CHECK(ellipsoid_contains(unit, Vector{0.6, 0.8}));
    CHECK_FALSE(ellipsoid_contains(unit, Vector{0.6, 0.81}));
    for (int trial = 0; trial < 100; ++trial) {
        const EllipsoidSafeSet s{empc::testing::random_spd(rng, 3, 0.1), 0.0};
        const Vector x = empc::testing::random_vector(rng, 3, -2, 2);
        double q = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) q += x[i] * s.E(i, j) * x[j];
        CHECK(ellipsoid_contains(s, x) == (q <= 1.0));
        CHECK(ellipsoid_contains(s, Vector{0, 0, 0}));
    }
}

TEST_CASE("fit_svm", "[verify]") {
    SECTION("symmetric pair") {
        LabeledInitialSet d{{{Vector{-1}, -1}, {Vector{1}, 1}}, "", 0};
        const SvmSafeSet s = fit_svm(d, {.C = 1e3, .nu = 1.0});
        double root = std::numeric_limits<double>::quiet_NaN();
        for (int k = -10000; k < 10000; ++k) {
            const double a = 1e-4 * k, b = a + 1e-4;
            if ((svm_decision(s, Vector{a}) < 0) != (svm_decision(s, Vector{b}) < 0)) root = 0.5 * (a + b);
        }
        CHECK(std::abs(root) <= 1e-3);
        CHECK(svm_classify(s, Vector{-0.5}) == -1);
        CHECK(svm_classify(s, Vector{0.5}) == 1);
    }
    SECTION("separable data") {
        std::mt19937_64 rng(11);
        LabeledInitialSet d;
        for (int i = 0; i < 200; ++i) {
            Vector x = empc::testing::random_vector(rng, 2);
            if (std::abs(x[0] + x[1]) < 0.2) continue;
            d.points.push_back({x, x[0] + x[1] > 0 ? 1 : -1});
        }
        const SvmSafeSet s = fit_svm(d, {.C = 1e3});
        for (const auto& p : d.points) CHECK(svm_classify(s, p.x0) == p.label);
        CHECK(s.kkt_violation < 1e-5);
        for (double c : s.coef) CHECK(std::abs(c) <= 1e3);
    }
    SECTION("xor pattern") {
        LabeledInitialSet d;
        std::mt19937_64 rng(12);
        for (int i = 0; i < 200; ++i) {
            const Vector x = empc::testing::random_vector(rng, 2);
            if (std::abs(x[0]) < 0.1 || std::abs(x[1]) < 0.1) continue;
            d.points.push_back({x, x[0] * x[1] > 0 ? 1 : -1});
        }
        const SvmSafeSet s = fit_svm(d, {.C = 1e3, .nu = 4.0});
        for (const auto& p : d.points) CHECK(svm_classify(s, p.x0) == p.label);
    }
    SECTION("dual optimality against an independent KKT check") {
        std::mt19937_64 rng(13);
        LabeledInitialSet d;
        for (int i = 0; i < 150; ++i) {
            const Vector x = empc::testing::random_vector(rng, 2);
            d.points.push_back({x, (x[0] * x[0] + x[1] > 0.2 + 0.3 * uniform(rng, -1, 1)) ? 1 : -1});
        }
        const double C = 10.0;
        const SvmSafeSet s = fit_svm(d, {.C = C, .cache_mb = 0});
        // Recover α_i from the support vectors, then check the KKT gap.
        const std::size_t n = d.points.size();
        Vector alpha(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < s.support_vectors.size(); ++k)
                if (s.support_vectors[k] == d.points[i].x0) alpha[i] = s.coef[k] * d.points[i].label;
        double up = -std::numeric_limits<double>::infinity(), low = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            const double yt = d.points[t].label;
            CHECK(alpha[t] >= 0.0);
            CHECK(alpha[t] <= C);
            double g = -1.0;
            for (std::size_t j = 0; j < n; ++j) {
                const Vector diff = sub(d.points[t].x0, d.points[j].x0);
                g += yt * d.points[j].label * alpha[j] * std::exp(-s.nu * dot(diff, diff));
            }
            const bool is_up = yt > 0 ? alpha[t] < C : alpha[t] > 0;
            const bool is_low = yt > 0 ? alpha[t] > 0 : alpha[t] < C;
            if (is_up) up = std::max(up, -yt * g);
            if (is_low) low = std::min(low, -yt * g);
        }
        CHECK(up - low <= 1e-5 + 1e-9);
        double balance = 0.0;
        for (std::size_t i = 0; i < n; ++i) balance += alpha[i] * d.points[i].label;
        CHECK(std::abs(balance) <= 1e-9);
    }
    SECTION("single class") {
        LabeledInitialSet d{{{Vector{0}, 1}, {Vector{1}, 1}}, "", 0};
        try {
            fit_svm(d, {});
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::SingleClassInput);
        }
    }
    SECTION("zero decision is positive") {
        SvmSafeSet s;
        CHECK(svm_classify(s, Vector{3.0}) == 1);
    }
}

TEST_CASE("metrics", "[verify]") {
    auto make = [](std::vector<int> labels) {
        LabeledInitialSet s;
        for (std::size_t i = 0; i < labels.size(); ++i)
            s.points.push_back({Vector{static_cast<double>(i)}, labels[i]});
        return s;
    };
    const LabeledInitialSet exp = make({1, 1, -1, 1});
    const LabeledInitialSet dnn = make({1, -1, -1, 1});
    const SafeSet everything = [](const Vector&) { return true; };
    const SafeSet nothing = [](const Vector&) { return false; };
    const SafeSet low = [](const Vector& x) { return x[0] < 1.5; };

    CHECK(metric_m_dir(exp, exp) == 1.0);
    CHECK(metric_m_dir(dnn, exp) == Catch::Approx(2.0 / 3.0));
    CHECK(metric_m_dir(make({-1, -1, -1, -1}), exp) == 0.0);
    try {
        metric_m_dir(exp, make({-1, -1, -1, -1}));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyPositiveReference);
    }
    CHECK_THROWS_AS(metric_m_dir(make({1}), exp), Error);

    CHECK(metric_m_vol(everything, exp, exp) == 1.0);
    CHECK(metric_m_vol(low, dnn, exp) == Catch::Approx(2.0 / 3.0));
    CHECK(metric_m_vol(nothing, dnn, exp) == 0.0);

    CHECK(metric_m_fp(everything, dnn) == 0.5);
    CHECK(metric_m_fp(low, dnn) == 0.5);
    try {
        metric_m_fp(nothing, dnn);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyDenominator);
    }
    const SafeCounts c = count_in_safe_set(low, exp);
    CHECK(c.inside == 2);
    CHECK(c.valid == 2);

    // Ellipsoid fitted on invalid points never contains them.
    std::mt19937_64 rng(14);
    LabeledInitialSet G;
    for (int i = 0; i < 400; ++i) {
        const Vector x = empc::testing::random_vector(rng, 2, -2, 2);
        G.points.push_back({x, norm_inf(x) < 1.0 ? 1 : -1});
    }
    const auto bad = G.states(-1);
    const EllipsoidSafeSet ell = fit_ellipsoid(2, bad, {});
    const SafeSet in_ell = [&](const Vector& x) { return ellipsoid_contains(ell, x); };
    const SafeCounts on_fit = count_in_safe_set(in_ell, G);
    CHECK(on_fit.inside == on_fit.valid);
    CHECK(on_fit.inside > 0);
    const double fp = metric_m_fp(in_ell, G);
    CHECK(fp == 0.0);
}

TEST_CASE("risk and confidence", "[verify]") {
    CHECK(empirical_risk(10, 10) == 1.0);
    CHECK(empirical_risk(0, 4) == 0.0);
    CHECK(hoeffding(10000, 0.02) == Catch::Approx(1.0 - 2.0 * std::exp(-8.0)).epsilon(1e-15));
    CHECK(hoeffding(10000, 0.02) == Catch::Approx(0.99933).margin(1e-5));
    CHECK(hoeffding(40000, 0.02) > 0.999);
    for (std::size_t n = 100; n < 5000; n += 100) CHECK(hoeffding(n + 100, 0.02) > hoeffding(n, 0.02));
    for (double d = 0.01; d < 0.05; d += 0.005) CHECK(hoeffding(1000, d + 0.005) > hoeffding(1000, d));
    CHECK_THROWS_AS(hoeffding(0, 0.1), Error);
    CHECK_THROWS_AS(hoeffding(10, 1.0), Error);
    CHECK_THROWS_AS(empirical_risk(5, 0), Error);
}
