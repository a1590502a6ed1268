#include "empc/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "empc/error.hpp"

namespace empc {

LtiSystem::LtiSystem(Matrix A_, Matrix B_) : A(std::move(A_)), B(std::move(B_)) {
    require(A.rows() == A.cols(), ErrorKind::DimensionMismatch, "LtiSystem: A must be square");
    require(B.rows() == A.rows(), ErrorKind::DimensionMismatch, "LtiSystem: B rows must match A");
}

void Scenario::validate() const {
    const std::size_t n = nx(), m = nu();
    require(n > 0 && m > 0, ErrorKind::PreconditionViolated, "scenario: empty system");
    require(Q.rows() == n && Q.cols() == n && P.rows() == n && P.cols() == n, ErrorKind::DimensionMismatch,
            "scenario: Q/P dims");
    require(R.rows() == m && R.cols() == m, ErrorKind::DimensionMismatch, "scenario: R dims");
    require(N >= 1, ErrorKind::PreconditionViolated, "scenario: horizon must be >= 1");
    require(is_symmetric(Q, 1e-10) && is_symmetric(P, 1e-10) && is_symmetric(R, 1e-10),
            ErrorKind::PreconditionViolated, "scenario: weights must be symmetric");
    require(sym_eig(Q).values.back() >= -1e-10, ErrorKind::PreconditionViolated, "scenario: Q not PSD");
    require(sym_eig(P).values.back() >= -1e-10, ErrorKind::PreconditionViolated, "scenario: P not PSD");
    require(sym_eig(R).values.back() >= 1e-10, ErrorKind::PreconditionViolated, "scenario: R not PD");
    require(X.num_rows() == 0 || X.dim() == n, ErrorKind::DimensionMismatch, "scenario: X dims");
    require(U.num_rows() == 0 || U.dim() == m, ErrorKind::DimensionMismatch, "scenario: U dims");
    require(!Xf || Xf->num_rows() == 0 || Xf->dim() == n, ErrorKind::DimensionMismatch, "scenario: Xf dims");
    require(sample_box.dim() == n, ErrorKind::DimensionMismatch, "scenario: sample_box dims");
    for (std::size_t i = 0; i < n; ++i)
        require(sample_box.lo[i] <= sample_box.hi[i], ErrorKind::PreconditionViolated, "scenario: sample_box inverted");
    require(settle_tol > 0.0, ErrorKind::PreconditionViolated, "scenario: settle_tol must be positive");
}

Vector step(const LtiSystem& sys, std::span<const double> x, std::span<const double> u) {
    require(x.size() == sys.nx() && u.size() == sys.nu(), ErrorKind::DimensionMismatch, "step: dims");
    Vector next = sys.A * x;
    const Vector bu = sys.B * u;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += bu[i];
    return next;
}

Trajectory rollout(const LtiSystem& sys, const Controller& controller, const Vector& x0, std::size_t k_end) {
    require(x0.size() == sys.nx(), ErrorKind::DimensionMismatch, "rollout: x0 dims");
    Trajectory t;
    t.states.reserve(k_end + 1);
    t.inputs.reserve(k_end);
    t.states.push_back(x0);
    for (std::size_t k = 0; k < k_end; ++k) {
        Vector u;
        try {
            u = controller(t.states.back());
        } catch (const Error& e) {
            throw ControllerInfeasibleError(k, e.what());
        }
        require(u.size() == sys.nu(), ErrorKind::DimensionMismatch, "rollout: controller output dims");
        t.states.push_back(step(sys, t.states.back(), u));
        t.inputs.push_back(std::move(u));
    }
    return t;
}

namespace {

Scenario make_scenario(std::string name, Matrix A, Matrix B, Vector x_bound, Vector u_bound, std::size_t N) {
    Scenario s;
    s.name = std::move(name);
    s.system = LtiSystem(std::move(A), std::move(B));
    const std::size_t n = s.nx(), m = s.nu();
    s.Q = Matrix::identity(n);
    s.R = 0.1 * Matrix::identity(m);
    s.P = solve_dare(s.system.A, s.system.B, s.Q, s.R);
    s.N = N;
    s.X = Polytope::symmetric_box(x_bound);
    s.U = Polytope::symmetric_box(u_bound);
    s.sample_box.hi = x_bound;
    s.sample_box.lo = scale(x_bound, -1.0);
    return s;
}

}  // namespace

Scenario builtin_scenario(std::string_view name) {
    if (name == "oscillator") {
        Scenario s;
        s.name = "oscillator";
        s.system = LtiSystem(Matrix{{0.5403, 0.8415}, {0.8415, 0.5403}}, Matrix{{-0.4597}, {0.8415}});
        s.Q = 2.0 * Matrix::identity(2);
        s.R = Matrix{{1.0}};
        s.P = Matrix(2, 2);
        s.N = 1;
        s.X = Polytope::symmetric_box(Vector{1.0, 1.0});
        s.U = Polytope::symmetric_box(Vector{1.0});
        s.sample_box = {{-1.0, -1.0}, {1.0, 1.0}};
        s.k_end = 20;
        return s;
    }
    if (name == "oscillating_masses") {
        Matrix A{{0.763, 0.460, 0.115, 0.020},
                 {-0.899, 0.763, 0.420, 0.115},
                 {0.115, 0.020, 0.763, 0.460},
                 {0.420, 0.115, -0.899, 0.763}};
        Matrix B{{0.014}, {0.063}, {0.221}, {0.367}};
        Scenario s = make_scenario("oscillating_masses", std::move(A), std::move(B), {4.0, 10.0, 4.0, 10.0}, {0.5}, 7);
        s.k_end = 100;
        return s;
    }
    if (name == "inverted_pendulum") {
        Matrix A{{1.0, 0.1, 0.0, 0.0}, {0.0, 0.9818, 0.2673, 0.0}, {0.0, 0.0, 1.0, 0.1}, {0.0, -0.0455, 3.1182, 1.0}};
        Matrix B{{0.0}, {0.1818}, {0.0}, {0.4546}};
        Scenario s = make_scenario("inverted_pendulum", std::move(A), std::move(B), {1.0, 1.5, 0.35, 1.0}, {1.0}, 10);
        s.k_end = 100;
        return s;
    }
    fail(ErrorKind::UnknownScenario, std::string(name));
}

std::vector<std::string> builtin_scenario_names() { return {"oscillator", "oscillating_masses", "inverted_pendulum"}; }

std::optional<std::size_t> settling_time(const Trajectory& traj, double tol) {
    require(tol > 0.0, ErrorKind::PreconditionViolated, "settling_time: tol must be positive");
    std::size_t k = traj.states.size();
    while (k > 0 && norm_inf(traj.states[k - 1]) <= tol) --k;
    if (k == traj.states.size()) return std::nullopt;
    return k;
}

double average_settling_time(std::span<const Trajectory> trajs, double tol) {
    require(!trajs.empty(), ErrorKind::EmptySet, "average_settling_time: no trajectories");
    double sum = 0.0;
    for (const auto& t : trajs) {
        const auto k = settling_time(t, tol);
        sum += static_cast<double>(k ? *k : t.inputs.size());
    }
    return sum / static_cast<double>(trajs.size());
}

double average_settling_time(std::span<const std::optional<std::size_t>> times, std::size_t k_end) {
    require(!times.empty(), ErrorKind::EmptySet, "average_settling_time: no trajectories");
    double sum = 0.0;
    for (const auto& k : times) sum += static_cast<double>(k ? *k : k_end);
    return sum / static_cast<double>(times.size());
}

double relative_ast(double ast, double ast_reference) {
    require(ast_reference > 0.0, ErrorKind::PreconditionViolated, "relative_ast: reference AST must be positive");
    return ast / ast_reference;
}

}  // namespace empc
