#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "empc/numerics.hpp"
#include "empc/polytope.hpp"

namespace empc {

/// x_{k+1} = A x_k + B u_k
struct LtiSystem {
    Matrix A;
    Matrix B;

    LtiSystem() = default;
    LtiSystem(Matrix A_, Matrix B_);

    std::size_t nx() const noexcept { return A.rows(); }
    std::size_t nu() const noexcept { return B.cols(); }
};

struct Box {
    Vector lo;
    Vector hi;

    std::size_t dim() const noexcept { return lo.size(); }
    Polytope polytope() const { return Polytope::box(lo, hi); }
};

struct Scenario {
    std::string name;
    LtiSystem system;
    Matrix Q, R, P;
    std::size_t N = 1;
    Polytope X;
    Polytope U;
    std::optional<Polytope> Xf;
    Box sample_box;
    double settle_tol = 1e-2;
    std::size_t k_end = 50;

    std::size_t nx() const noexcept { return system.nx(); }
    std::size_t nu() const noexcept { return system.nu(); }

    /// Throws PreconditionViolated when weights or dimensions are invalid.
    void validate() const;
};

struct Trajectory {
    std::vector<Vector> states;  ///< x_0 … x_{k_end}
    std::vector<Vector> inputs;  ///< u_0 … u_{k_end-1}
};

/// Maps a state to an input. Signals infeasibility by throwing empc::Error.
using Controller = std::function<Vector(const Vector&)>;

Vector step(const LtiSystem& sys, std::span<const double> x, std::span<const double> u);

/// Closed-loop simulation for k_end steps. Controller failures are rethrown as
/// ControllerInfeasibleError carrying the step index.
Trajectory rollout(const LtiSystem& sys, const Controller& controller, const Vector& x0, std::size_t k_end);

/// Names: oscillator, oscillating_masses, inverted_pendulum.
Scenario builtin_scenario(std::string_view name);
std::vector<std::string> builtin_scenario_names();

/// First index k with ||x_j||∞ ≤ tol for every j ≥ k; nullopt if the last
/// state is outside the tolerance.
std::optional<std::size_t> settling_time(const Trajectory& traj, double tol);

/// Mean settling time; unsettled trajectories count as k_end (their input count).
double average_settling_time(std::span<const Trajectory> trajs, double tol);
double average_settling_time(std::span<const std::optional<std::size_t>> times, std::size_t k_end);
double relative_ast(double ast, double ast_reference);

}  // namespace empc
