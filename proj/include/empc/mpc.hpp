#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "empc/dynamics.hpp"
#include "empc/parallel.hpp"
#include "empc/qp.hpp"

namespace empc {

/// Condensed MPC problem in the stacked input sequence ũ ∈ ℝ^{N·n_u}:
///
///   min  ũᵀFũ + xᵀGũ + xᵀHx   s.t.  C_c·ũ ≤ T·x + c_c
///
/// Constraint rows are ordered by time: the x_0 rows (parameter-only, zero in
/// C_c), then for each k the rows of u_k ∈ U followed by x_{k+1} ∈ X (and
/// x_N ∈ X_f when a terminal set is given).
struct CondensedMpc {
    Matrix F, G, H;
    Matrix Cc, T;
    Vector cc;
    std::size_t nx = 0, nu = 0, N = 0;
    std::string fingerprint;  ///< hash of the condensed data, used to tag datasets

    std::size_t num_vars() const noexcept { return N * nu; }
    std::size_t num_constraints() const noexcept { return cc.size(); }

    /// ũᵀFũ + xᵀGũ + xᵀHx
    double cost(std::span<const double> x, std::span<const double> useq) const;
    /// The QP at a given state (objective without the constant xᵀHx).
    QpProblem qp_at(std::span<const double> x) const;
};

CondensedMpc condense(const Scenario& s);

/// Full QP solution at x; status reports infeasibility instead of throwing.
QpSolution solve_condensed(const CondensedMpc& m, std::span<const double> x);

/// First-step optimal input. Throws Infeasible outside the feasibility region.
Vector mpc_control(const CondensedMpc& m, std::span<const double> x);

/// True when the condensed QP has a feasible point at x.
bool is_feasible(const CondensedMpc& m, std::span<const double> x);

struct DataPoint {
    Vector x;
    Vector u;
};

struct Dataset {
    std::vector<DataPoint> points;
    std::uint64_t seed = 0;
    std::string fingerprint;
    std::size_t draws = 0;  ///< total sampled candidates, including rejected ones

    std::size_t nx() const { return points.empty() ? 0 : points.front().x.size(); }
    std::size_t nu() const { return points.empty() ? 0 : points.front().u.size(); }
};

/// Uniform rejection sampling over `box`; point i uses its own stream so the
/// result does not depend on evaluation order.
Dataset generate_dataset(const CondensedMpc& m, std::size_t n_tr, std::uint64_t seed, const Box& box,
                         Exec exec = Exec::Parallel);

}  // namespace empc
