#include <algorithm>
#include <cmath>
#include <limits>

#include "empc/error.hpp"
#include "empc/qp.hpp"

namespace empc {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_((rows) * (cols + 1), 0.0), basis_(rows) {}

    double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return t_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double rhs(std::size_t r) const { return at(r, cols_); }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::vector<std::size_t>& basis() { return basis_; }

    void pivot(std::size_t pr, std::size_t pc) {
        const double inv = 1.0 / at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) *= inv;
        at(pr, pc) = 1.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
            at(r, pc) = 0.0;
        }
        basis_[pr] = pc;
    }

    void drop_row(std::size_t r) {
        t_.erase(t_.begin() + static_cast<std::ptrdiff_t>(r * (cols_ + 1)),
                 t_.begin() + static_cast<std::ptrdiff_t>((r + 1) * (cols_ + 1)));
        basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
        --rows_;
    }

    // Minimizes costᵀy over the current basis. Columns with allowed[c] ==
    // false never enter. Returns false when unbounded.
    bool optimize(std::span<const double> cost, const std::vector<bool>& allowed) {
        const std::size_t max_dantzig = 50 * (rows_ + cols_) + 100;
        const std::size_t max_total = 100000 + 200 * (rows_ + cols_);
        std::vector<double> d(cols_);
        for (std::size_t iter = 0; iter < max_total; ++iter) {
            for (std::size_t c = 0; c < cols_; ++c) {
                double v = cost[c];
                for (std::size_t r = 0; r < rows_; ++r) v -= cost[basis_[r]] * at(r, c);
                d[c] = v;
            }
            const bool bland = iter >= max_dantzig;
            std::size_t enter = cols_;
            double best = -kCostTol;
            for (std::size_t c = 0; c < cols_; ++c) {
                if (!allowed[c] || d[c] >= -kCostTol) continue;
                if (bland) {
                    enter = c;
                    break;
                }
                if (d[c] < best) {
                    best = d[c];
                    enter = c;
                }
            }
            if (enter == cols_) return true;
            std::size_t leave = rows_;
            double ratio = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < rows_; ++r) {
                const double a = at(r, enter);
                if (a <= kPivotTol) continue;
                const double q = std::max(rhs(r), 0.0) / a;
                if (leave == rows_ || q < ratio - 1e-13) {
                    ratio = q;
                    leave = r;
                } else if (q <= ratio + 1e-13 && basis_[r] < basis_[leave]) {
                    ratio = std::min(ratio, q);
                    leave = r;
                }
            }
            if (leave == rows_) return false;
            pivot(leave, enter);
        }
        fail(ErrorKind::MaxIter, "simplex iteration cap reached");
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
};

}  // namespace

LpResult solve_lp(std::span<const double> c, const Matrix& A, std::span<const double> b) {
    const std::size_t n = c.size(), m = b.size();
    require(A.rows() == m && (m == 0 || A.cols() == n), ErrorKind::DimensionMismatch, "solve_lp dims");

    std::size_t n_art = 0;
    for (double bi : b) n_art += bi < 0.0;
    const std::size_t x_cols = 2 * n, slack0 = x_cols, art0 = x_cols + m, cols = x_cols + m + n_art;

    Tableau tab(m, cols);
    std::size_t art = art0;
    for (std::size_t i = 0; i < m; ++i) {
        const double sgn = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            tab.at(i, j) = sgn * A(i, j);
            tab.at(i, n + j) = -sgn * A(i, j);
        }
        tab.at(i, slack0 + i) = sgn;
        tab.rhs(i) = sgn * b[i];
        if (sgn < 0.0) {
            tab.at(i, art) = 1.0;
            tab.basis()[i] = art++;
        } else {
            tab.basis()[i] = slack0 + i;
        }
    }

    std::vector<bool> allowed(cols, true);
    if (n_art > 0) {
        std::vector<double> cost1(cols, 0.0);
        for (std::size_t j = art0; j < cols; ++j) cost1[j] = 1.0;
        tab.optimize(cost1, allowed);
        double infeas = 0.0;
        for (std::size_t r = 0; r < tab.rows(); ++r)
            if (tab.basis()[r] >= art0) infeas += tab.rhs(r);
        double bscale = 1.0;
        for (double bi : b) bscale = std::max(bscale, std::abs(bi));
        if (infeas > 1e-9 * bscale) return {LpStatus::Infeasible, {}, 0.0};
        // Drive zero-level artificials out of the basis; drop redundant rows.
        for (std::size_t r = 0; r < tab.rows();) {
            if (tab.basis()[r] < art0) {
                ++r;
                continue;
            }
            std::size_t pc = art0;
            for (std::size_t cc = 0; cc < art0; ++cc)
                if (std::abs(tab.at(r, cc)) > 1e-9) {
                    pc = cc;
                    break;
                }
            if (pc == art0) {
                tab.drop_row(r);
            } else {
                tab.pivot(r, pc);
                ++r;
            }
        }
        for (std::size_t j = art0; j < cols; ++j) allowed[j] = false;
    }

    std::vector<double> cost2(cols, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        cost2[j] = c[j];
        cost2[n + j] = -c[j];
    }
    if (!tab.optimize(cost2, allowed)) return {LpStatus::Unbounded, {}, 0.0};

    Vector y(cols, 0.0);
    for (std::size_t r = 0; r < tab.rows(); ++r) y[tab.basis()[r]] = tab.rhs(r);
    LpResult res{LpStatus::Optimal, Vector(n), 0.0};
    for (std::size_t j = 0; j < n; ++j) res.x[j] = y[j] - y[n + j];
    res.objective = dot(c, res.x);
    return res;
}

}  // namespace empc
