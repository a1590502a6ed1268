#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "empc/numerics.hpp"

namespace empc {

/// min zᵀHz + qᵀz  s.t.  A·z ≤ b.  Note the objective has no ½ factor.
struct QpProblem {
    Matrix H;
    Vector q;
    Matrix A;
    Vector b;

    std::size_t num_vars() const noexcept { return q.size(); }
    std::size_t num_constraints() const noexcept { return b.size(); }
    double objective(std::span<const double> z) const;
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

struct QpSolution {
    Vector z;
    Vector duals;  ///< one per constraint row, zero for inactive rows
    QpStatus status = QpStatus::MaxIter;
    double kkt_residual = 0.0;
    bool regularized = false;               ///< H was semidefinite and got 1e-10·I added
    std::vector<std::size_t> active_set;    ///< final working set, ascending
    std::size_t iterations = 0;
};

inline constexpr double kDefaultQpTol = 1e-8;

/// Primal active-set method. The start point comes from a phase-1 LP
/// (minimize the max violation) unless z = 0 is already feasible; the working
/// set starts empty. Ties in blocking/dropping are broken by lowest row index.
/// Throws NonConvex when H has an eigenvalue below -1e-8.
/// max_iter = 0 selects the default 50·(n+m).
QpSolution solve_qp(const QpProblem& p, double tol = kDefaultQpTol, std::size_t max_iter = 0);

/// Max over stationarity, primal feasibility, dual sign and complementarity
/// violations of a candidate primal/dual pair.
double check_kkt(const QpProblem& p, std::span<const double> z, std::span<const double> duals);

// ---------------------------------------------------------------------------
// Linear programming. Used for phase 1, Chebyshev centers and redundancy
// elimination; not part of the mpQP contract itself.

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Vector x;
    double objective = 0.0;
};

/// min cᵀx s.t. A·x ≤ b with x free. Dense two-phase tableau simplex with
/// Bland's rule.
LpResult solve_lp(std::span<const double> c, const Matrix& A, std::span<const double> b);

}  // namespace empc
