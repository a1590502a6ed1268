#include "empc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "empc/error.hpp"
#include "empc/qp.hpp"

namespace empc {

Polytope::Polytope(Matrix C_, Vector c_) : C(std::move(C_)), c(std::move(c_)) {
    require(C.rows() == c.size(), ErrorKind::DimensionMismatch, "Polytope: row counts differ");
    require(all_finite(C.data()) && all_finite(c), ErrorKind::PreconditionViolated, "Polytope: non-finite entries");
}

Polytope Polytope::box(std::span<const double> lo, std::span<const double> hi) {
    require(lo.size() == hi.size(), ErrorKind::DimensionMismatch, "box bounds");
    const std::size_t d = lo.size();
    Matrix C(2 * d, d);
    Vector c(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        C(i, i) = 1.0;
        c[i] = hi[i];
        C(d + i, i) = -1.0;
        c[d + i] = -lo[i];
    }
    return {std::move(C), std::move(c)};
}

Polytope Polytope::symmetric_box(std::span<const double> bound) {
    Vector lo(bound.size());
    for (std::size_t i = 0; i < bound.size(); ++i) lo[i] = -bound[i];
    return box(lo, bound);
}

bool Polytope::contains(std::span<const double> x, double tol) const { return max_violation(x) <= tol; }

double Polytope::max_violation(std::span<const double> x) const {
    require(num_rows() == 0 || x.size() == C.cols(), ErrorKind::DimensionMismatch, "Polytope: point dimension");
    double v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < num_rows(); ++i) v = std::max(v, dot(C.row(i), x) - c[i]);
    return v;
}

Polytope Polytope::intersect(const Polytope& other) const {
    if (num_rows() == 0) return other;
    if (other.num_rows() == 0) return *this;
    require(dim() == other.dim(), ErrorKind::DimensionMismatch, "intersect dims");
    Matrix C2 = C;
    Vector c2 = c;
    for (std::size_t i = 0; i < other.num_rows(); ++i) {
        C2.append_row(other.C.row(i));
        c2.push_back(other.c[i]);
    }
    return {std::move(C2), std::move(c2)};
}

std::optional<ChebyshevBall> chebyshev_ball(const Polytope& p) {
    const std::size_t d = p.dim(), m = p.num_rows();
    if (m == 0) return ChebyshevBall{Vector(d, 0.0), kChebyshevCap};
    // max r  s.t.  C_i x + ||C_i|| r ≤ c_i,  r ≤ cap
    Matrix a(m + 1, d + 1);
    Vector b(m + 1);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) a(i, j) = p.C(i, j);
        a(i, d) = norm2(p.C.row(i));
        b[i] = p.c[i];
    }
    a(m, d) = 1.0;
    b[m] = kChebyshevCap;
    Vector cost(d + 1, 0.0);
    cost[d] = -1.0;
    const LpResult lp = solve_lp(cost, a, b);
    if (lp.status == LpStatus::Infeasible) return std::nullopt;
    if (lp.status == LpStatus::Unbounded) return ChebyshevBall{Vector(d, 0.0), kChebyshevCap};
    return ChebyshevBall{Vector(lp.x.begin(), lp.x.begin() + static_cast<std::ptrdiff_t>(d)), lp.x[d]};
}

std::optional<ChebyshevBall> chebyshev_ball_on_hyperplane(const Polytope& p, std::span<const double> a_in,
                                                          double b_in) {
    const std::size_t d = p.dim();
    const double an = norm2(a_in);
    require(an > 0.0, ErrorKind::PreconditionViolated, "hyperplane normal is zero");
    const Vector a = scale(a_in, 1.0 / an);
    const double b = b_in / an;

    Matrix lhs(0, d + 1);
    Vector rhs;
    Vector row(d + 1);
    for (std::size_t i = 0; i < p.num_rows(); ++i) {
        const auto ci = p.C.row(i);
        const double proj = dot(ci, a);
        double tang2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double t = ci[j] - proj * a[j];
            tang2 += t * t;
        }
        for (std::size_t j = 0; j < d; ++j) row[j] = ci[j];
        row[d] = std::sqrt(tang2);
        lhs.append_row(row);
        rhs.push_back(p.c[i]);
    }
    // a·x = b as two inequalities, radius cap.
    for (std::size_t j = 0; j < d; ++j) row[j] = a[j];
    row[d] = 0.0;
    lhs.append_row(row);
    rhs.push_back(b);
    for (std::size_t j = 0; j < d; ++j) row[j] = -a[j];
    lhs.append_row(row);
    rhs.push_back(-b);
    std::fill(row.begin(), row.end(), 0.0);
    row[d] = 1.0;
    lhs.append_row(row);
    rhs.push_back(kChebyshevCap);

    Vector cost(d + 1, 0.0);
    cost[d] = -1.0;
    const LpResult lp = solve_lp(cost, lhs, rhs);
    if (lp.status == LpStatus::Infeasible) return std::nullopt;
    if (lp.status == LpStatus::Unbounded) return ChebyshevBall{Vector(d, 0.0), kChebyshevCap};
    return ChebyshevBall{Vector(lp.x.begin(), lp.x.begin() + static_cast<std::ptrdiff_t>(d)), lp.x[d]};
}

Polytope remove_redundant(const Polytope& p, double tol) {
    const std::size_t m = p.num_rows();
    std::vector<bool> keep(m, true);
    for (std::size_t i = 0; i < m; ++i)
        if (norm2(p.C.row(i)) <= 1e-12) keep[i] = false;
    // Exact duplicates (after scaling) are removed before the LP tests.
    for (std::size_t i = 0; i < m; ++i) {
        if (!keep[i]) continue;
        const double ni = norm2(p.C.row(i));
        for (std::size_t j = i + 1; j < m; ++j) {
            if (!keep[j]) continue;
            const double nj = norm2(p.C.row(j));
            double diff = 0.0;
            for (std::size_t k = 0; k < p.dim(); ++k) diff = std::max(diff, std::abs(p.C(i, k) / ni - p.C(j, k) / nj));
            if (diff > 1e-12) continue;
            if (p.c[j] / nj >= p.c[i] / ni) keep[j] = false;
            else {
                keep[i] = false;
                break;
            }
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (!keep[i]) continue;
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i && keep[j]) others.push_back(j);
        // Relax row i slightly so the LP stays bounded in its direction.
        Matrix a = p.C.select_rows(others);
        Vector b;
        for (std::size_t j : others) b.push_back(p.c[j]);
        a.append_row(p.C.row(i));
        b.push_back(p.c[i] + 1.0);
        const Vector cost = scale(p.C.row_vector(i), -1.0);
        const LpResult lp = solve_lp(cost, a, b);
        if (lp.status != LpStatus::Optimal) continue;
        const double reach = -lp.objective;
        if (reach <= p.c[i] + tol * std::max(1.0, norm2(p.C.row(i)))) keep[i] = false;
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m; ++i)
        if (keep[i]) idx.push_back(i);
    Vector c;
    for (std::size_t i : idx) c.push_back(p.c[i]);
    Matrix C = p.C.select_rows(idx);
    if (idx.empty()) C = Matrix(0, p.dim());
    return {std::move(C), std::move(c)};
}

std::optional<std::pair<Vector, Vector>> bounding_box(const Polytope& p) {
    const std::size_t d = p.dim();
    Vector lo(d), hi(d);
    Vector cost(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        cost.assign(d, 0.0);
        cost[j] = 1.0;
        LpResult r = solve_lp(cost, p.C, p.c);
        if (r.status != LpStatus::Optimal) return std::nullopt;
        lo[j] = r.x[j];
        cost[j] = -1.0;
        r = solve_lp(cost, p.C, p.c);
        if (r.status != LpStatus::Optimal) return std::nullopt;
        hi[j] = r.x[j];
    }
    return std::make_pair(lo, hi);
}

}  // namespace empc
