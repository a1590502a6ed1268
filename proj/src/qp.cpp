#include "empc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "empc/error.hpp"

namespace empc {

double QpProblem::objective(std::span<const double> z) const { return dot(z, H * z) + dot(q, z); }

double check_kkt(const QpProblem& p, std::span<const double> z, std::span<const double> duals) {
    const std::size_t n = p.num_vars(), m = p.num_constraints();
    require(z.size() == n && duals.size() == m && p.H.rows() == n && p.H.cols() == n,
            ErrorKind::DimensionMismatch, "check_kkt dims");
    require(m == 0 || (p.A.rows() == m && p.A.cols() == n), ErrorKind::DimensionMismatch, "check_kkt constraint dims");

    Vector station = p.H * z;
    for (std::size_t i = 0; i < n; ++i) station[i] = 2.0 * station[i] + p.q[i];
    double res = 0.0;
    if (m > 0) {
        const Vector at_l = transpose_times(p.A, duals);
        for (std::size_t i = 0; i < n; ++i) station[i] += at_l[i];
        const Vector az = p.A * z;
        for (std::size_t i = 0; i < m; ++i) {
            const double slack = az[i] - p.b[i];
            res = std::max(res, slack);
            res = std::max(res, -duals[i]);
            res = std::max(res, std::abs(duals[i] * slack));
        }
    }
    return std::max(res, norm_inf(station));
}

namespace {

struct EqualitySolve {
    Vector step;     // primal step (or primal point when solving the polish system)
    Vector lambda;   // multipliers of the working rows
};

// Solves  Hh·p + A_Wᵀλ = -g,  A_W·p = r  via the Schur complement on the
// Cholesky factor of Hh.
std::optional<EqualitySolve> solve_equality(const Cholesky& hh, const Matrix& aw, std::span<const double> g,
                                            std::span<const double> r) {
    const std::size_t n = g.size(), k = aw.rows();
    Vector hg = hh.solve(g);
    if (k == 0) return EqualitySolve{scale(hg, -1.0), {}};
    const Matrix y = hh.solve(aw.transpose());  // n×k
    const Matrix s = aw * y;
    Vector rhs = aw * hg;
    for (std::size_t i = 0; i < k; ++i) rhs[i] = -rhs[i] - r[i];
    // A_W p = r with p = -Hh⁻¹(g + A_Wᵀλ)  =>  S λ = -A_W Hh⁻¹ g - r
    std::optional<Cholesky> sc;
    try {
        sc.emplace(s);
    } catch (const Error&) {
        return std::nullopt;
    }
    Vector lambda = sc->solve(rhs);
    Vector p(n);
    const Vector yl = y * lambda;
    for (std::size_t i = 0; i < n; ++i) p[i] = -(hg[i] + yl[i]);
    return EqualitySolve{std::move(p), std::move(lambda)};
}

Vector phase_one(const QpProblem& p, double tol, bool& infeasible) {
    const std::size_t n = p.num_vars(), m = p.num_constraints();
    infeasible = false;
    Vector zero(n, 0.0);
    if (m == 0) return zero;
    double viol = 0.0;
    for (std::size_t i = 0; i < m; ++i) viol = std::max(viol, -p.b[i]);
    if (viol <= 0.0) return zero;

    // min t  s.t.  A z - t ≤ b,  -t ≤ 0
    Matrix a(m + 1, n + 1);
    Vector b(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) a(i, j) = p.A(i, j);
        a(i, n) = -1.0;
        b[i] = p.b[i];
    }
    a(m, n) = -1.0;
    Vector c(n + 1, 0.0);
    c[n] = 1.0;
    const LpResult lp = solve_lp(c, a, b);
    if (lp.status != LpStatus::Optimal || lp.x[n] > tol) {
        infeasible = true;
        return zero;
    }
    return Vector(lp.x.begin(), lp.x.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace

QpSolution solve_qp(const QpProblem& p, double tol, std::size_t max_iter) {
    const std::size_t n = p.num_vars(), m = p.num_constraints();
    require(p.H.rows() == n && p.H.cols() == n, ErrorKind::DimensionMismatch, "solve_qp: H dims");
    require(m == 0 || (p.A.rows() == m && p.A.cols() == n), ErrorKind::DimensionMismatch, "solve_qp: A dims");
    require(is_symmetric(p.H, 1e-10), ErrorKind::PreconditionViolated, "solve_qp: H not symmetric");
    if (max_iter == 0) max_iter = 50 * (n + m);

    QpSolution sol;
    Matrix hh = 2.0 * p.H;
    std::optional<Cholesky> chol;
    try {
        chol.emplace(hh);
    } catch (const Error&) {
        const SymEig eig = sym_eig(p.H);
        if (!eig.values.empty() && eig.values.back() < -1e-8) fail(ErrorKind::NonConvex, "solve_qp: H indefinite");
        for (std::size_t i = 0; i < n; ++i) hh(i, i) += 2e-10;
        chol.emplace(hh);
        sol.regularized = true;
    }

    bool infeasible = false;
    Vector z = phase_one(p, tol, infeasible);
    if (infeasible) {
        sol.status = QpStatus::Infeasible;
        sol.z = std::move(z);
        sol.duals.assign(m, 0.0);
        return sol;
    }

    std::vector<std::size_t> work;
    std::vector<bool> in_work(m, false);
    Vector lambda_w;
    bool converged = false;
    // After an unblocked full step z is the minimizer on the working set; in
    // ill-conditioned subspaces the recomputed step never hits exactly zero.
    bool full_step = false;
    std::size_t iter = 0;

    for (; iter < max_iter; ++iter) {
        Vector g = hh * z;
        for (std::size_t i = 0; i < n; ++i) g[i] += p.q[i];
        const Matrix aw = p.A.select_rows(work);
        const Vector zeros(work.size(), 0.0);
        auto eq = solve_equality(*chol, aw, g, zeros);
        if (!eq) fail(ErrorKind::NoConvergence, "solve_qp: dependent working set");

        const double step_norm = norm_inf(eq->step);
        if (full_step || step_norm <= 1e-12 * (1.0 + norm_inf(z))) {
            full_step = false;
            std::size_t drop = work.size();
            double most_neg = -1e-10 * (1.0 + norm_inf(g));
            for (std::size_t k = 0; k < work.size(); ++k) {
                // Ascending row order makes ties resolve to the lowest index.
                if (eq->lambda[k] < most_neg ||
                    (drop < work.size() && eq->lambda[k] == most_neg && work[k] < work[drop])) {
                    most_neg = eq->lambda[k];
                    drop = k;
                }
            }
            if (drop == work.size()) {
                lambda_w = std::move(eq->lambda);
                converged = true;
                break;
            }
            in_work[work[drop]] = false;
            work.erase(work.begin() + static_cast<std::ptrdiff_t>(drop));
            continue;
        }

        double alpha = 1.0;
        std::size_t blocking = m;
        const double pnorm = norm2(eq->step);
        for (std::size_t i = 0; i < m; ++i) {
            if (in_work[i]) continue;
            const auto ai = p.A.row(i);
            const double ap = dot(ai, eq->step);
            if (ap <= 1e-14 * norm2(ai) * pnorm) continue;
            const double slack = std::max(0.0, p.b[i] - dot(ai, z));
            const double ratio = slack / ap;
            if (ratio < alpha) {
                alpha = ratio;
                blocking = i;
            }
        }
        for (std::size_t j = 0; j < n; ++j) z[j] += alpha * eq->step[j];
        full_step = blocking == m;
        if (blocking < m) {
            in_work[blocking] = true;
            work.insert(std::upper_bound(work.begin(), work.end(), blocking), blocking);
        }
    }
    sol.iterations = iter;

    if (converged) {
        // Re-solve the final equality system from scratch to remove drift.
        Vector bw(work.size());
        for (std::size_t k = 0; k < work.size(); ++k) bw[k] = p.b[work[k]];
        const Matrix aw = p.A.select_rows(work);
        if (auto pol = solve_equality(*chol, aw, p.q, bw)) {
            // Here the "step" is the point itself since g = q and r = b_W.
            bool ok = true;
            for (std::size_t i = 0; i < m && ok; ++i)
                if (!in_work[i] && dot(p.A.row(i), pol->step) - p.b[i] > tol) ok = false;
            for (double l : pol->lambda)
                if (l < -tol) ok = false;
            if (ok) {
                z = std::move(pol->step);
                lambda_w = std::move(pol->lambda);
            }
        }
    }

    sol.z = std::move(z);
    sol.duals.assign(m, 0.0);
    for (std::size_t k = 0; k < work.size() && k < lambda_w.size(); ++k) sol.duals[work[k]] = std::max(0.0, lambda_w[k]);
    sol.active_set = work;
    sol.kkt_residual = check_kkt(p, sol.z, sol.duals);
    sol.status = converged ? QpStatus::Optimal : QpStatus::MaxIter;
    return sol;
}

}  // namespace empc
