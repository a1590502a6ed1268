#include "empc/pwa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "empc/error.hpp"
#include "empc/qp.hpp"

namespace empc {

void PwaFunction::validate() const {
    require(!regions.empty(), ErrorKind::PreconditionViolated, "PWA function has no regions");
    for (const auto& r : regions) {
        require(r.K.rows() == nu && r.K.cols() == nx && r.g.size() == nu, ErrorKind::DimensionMismatch,
                "PWA gain dimensions");
        require(r.region.num_rows() == 0 || r.region.dim() == nx, ErrorKind::DimensionMismatch, "PWA region dimension");
    }
}

std::optional<std::size_t> locate(const PwaFunction& f, std::span<const double> x, double tol) {
    require(x.size() == f.nx, ErrorKind::DimensionMismatch, "locate: point dimension");
    for (std::size_t i = 0; i < f.regions.size(); ++i)
        if (f.regions[i].region.contains(x, tol)) return i;
    return std::nullopt;
}

Vector eval_pwa(const PwaFunction& f, std::span<const double> x) {
    const auto i = locate(f, x);
    if (!i) fail(ErrorKind::OutsidePartition, "point is outside every region");
    const PwaRegion& r = f.regions[*i];
    return add(r.K * x, r.g);
}

Vector AffineTransform::apply(std::span<const double> v) const { return add(S * v, t); }

Vector AffineTransform::apply_inverse(std::span<const double> w) const { return lu_solve(S, sub(w, t)); }

AffineTransform AffineTransform::identity(std::size_t n) { return {Matrix::identity(n), Vector(n, 0.0)}; }

namespace {

// Largest value of a·x over p; nullopt when unbounded.
std::optional<double> support(const Polytope& p, std::span<const double> a) {
    const LpResult lp = solve_lp(scale(a, -1.0), p.C, p.c);
    if (lp.status != LpStatus::Optimal) return std::nullopt;
    return -lp.objective;
}

}  // namespace

NormalizedPwa normalize_domain(const PwaFunction& f, const Box& state_box, const Box& input_range) {
    f.validate();
    const std::size_t nx = f.nx, nu = f.nu;
    require(state_box.dim() == nx && input_range.dim() == nu, ErrorKind::DimensionMismatch, "normalize_domain: box dims");

    Vector width(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        width[j] = state_box.hi[j] - state_box.lo[j];
        if (!(width[j] > 0.0)) fail(ErrorKind::NonInvertible, "state box has a zero-width side");
    }

    constexpr double slack = 1e-9;
    for (const auto& r : f.regions) {
        for (std::size_t j = 0; j < nx; ++j) {
            Vector e(nx, 0.0);
            e[j] = 1.0;
            const auto hi = support(r.region, e);
            e[j] = -1.0;
            const auto lo = support(r.region, e);
            require(hi && lo && *hi <= state_box.hi[j] + slack && -*lo >= state_box.lo[j] - slack,
                    ErrorKind::PreconditionViolated, "state box does not bound the partition");
        }
        for (std::size_t i = 0; i < nu; ++i) {
            const auto hi = support(r.region, r.K.row(i));
            const auto lo = support(r.region, scale(r.K.row(i), -1.0));
            require(hi && lo, ErrorKind::PreconditionViolated, "unbounded region");
            const double scale_tol = slack * (1.0 + std::abs(r.g[i]));
            require(*hi + r.g[i] <= input_range.hi[i] + scale_tol && r.g[i] - *lo >= input_range.lo[i] - scale_tol,
                    ErrorKind::PreconditionViolated, "input range does not bound the law");
        }
    }

    NormalizedPwa out;
    out.Ax.S = Matrix(nx, nx);
    out.Ax.t = Vector(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        out.Ax.S(j, j) = 1.0 / width[j];
        out.Ax.t[j] = -state_box.lo[j] / width[j];
    }
    out.Au = AffineTransform::identity(nu);
    for (std::size_t i = 0; i < nu; ++i) out.Au.t[i] = -input_range.lo[i];

    // x = W·x̂ + lo with W = diag(width)
    out.f_hat.nx = nx;
    out.f_hat.nu = nu;
    for (const auto& r : f.regions) {
        PwaRegion h;
        Matrix Z = r.region.C;
        Vector z = r.region.c;
        const Vector zlo = Z * std::span<const double>(state_box.lo);
        for (std::size_t i = 0; i < Z.rows(); ++i) {
            for (std::size_t j = 0; j < nx; ++j) Z(i, j) *= width[j];
            z[i] -= zlo[i];
        }
        h.region = Polytope(std::move(Z), std::move(z));
        h.K = r.K;
        for (std::size_t i = 0; i < nu; ++i)
            for (std::size_t j = 0; j < nx; ++j) h.K(i, j) *= width[j];
        h.g = add(r.g, r.K * std::span<const double>(state_box.lo));
        for (std::size_t i = 0; i < nu; ++i) h.g[i] -= input_range.lo[i];
        out.f_hat.regions.push_back(std::move(h));
    }
    return out;
}

double ConvexPwa::value(std::span<const double> x) const {
    require(!pieces.empty(), ErrorKind::EmptyPieces, "convex PWA has no pieces");
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& p : pieces) v = std::max(v, p(x));
    return v;
}

std::pair<Vector, double> canonical_hyperplane(std::span<const double> a, double b) {
    const double n = norm2(a);
    require(n > 0.0, ErrorKind::PreconditionViolated, "zero hyperplane normal");
    double s = 1.0 / n;
    for (double v : a) {
        if (std::abs(v) > 1e-12 * n) {
            if (v < 0.0) s = -s;
            break;
        }
    }
    return {scale(a, s), b * s};
}

namespace {

constexpr double kHyperplaneTol = 1e-9;
constexpr double kFacetRadius = 1e-7;
constexpr double kCellRadius = 1e-9;
constexpr double kContinuityTol = 1e-6;
constexpr double kRampMargin = 1e-9;

struct Hyperplane {
    Vector a;  // unit norm, canonical sign
    double b;
};

bool same_hyperplane(const Hyperplane& h, std::span<const double> a, double b, double tol) {
    double d = std::abs(h.b - b);
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(h.a[j] - a[j]));
    return d <= tol;
}

std::size_t intern(std::vector<Hyperplane>& list, const Vector& a, double b) {
    for (std::size_t k = 0; k < list.size(); ++k)
        if (same_hyperplane(list[k], a, b, kHyperplaneTol)) return k;
    list.push_back({a, b});
    return list.size() - 1;
}

void add_piece(std::vector<AffinePiece>& pieces, AffinePiece p) {
    for (const auto& q : pieces) {
        double d = std::abs(q.b - p.b);
        for (std::size_t j = 0; j < p.a.size(); ++j) d = std::max(d, std::abs(q.a[j] - p.a[j]));
        if (d <= 1e-12) return;
    }
    pieces.push_back(std::move(p));
}

// Adds a·x ≤ b (side = -1) or a·x ≥ b (side = +1) to p.
Polytope with_side(const Polytope& p, const Hyperplane& h, int side) {
    Matrix C = p.C;
    Vector c = p.c;
    if (C.rows() == 0) C = Matrix(0, h.a.size());
    C.append_row(side < 0 ? h.a : scale(h.a, -1.0));
    c.push_back(side < 0 ? h.b : -h.b);
    return {std::move(C), std::move(c)};
}

}  // namespace

DcDecomposition dc_decompose(const PwaFunction& f, std::size_t output) {
    f.validate();
    require(output < f.nu, ErrorKind::DimensionMismatch, "dc_decompose: output index");
    const std::size_t nx = f.nx, nr = f.regions.size();

    // Region rows → shared hyperplane ids.
    std::vector<Hyperplane> planes;
    std::vector<std::vector<std::size_t>> region_planes(nr);
    for (std::size_t i = 0; i < nr; ++i) {
        const Polytope& p = f.regions[i].region;
        for (std::size_t r = 0; r < p.num_rows(); ++r) {
            if (norm2(p.C.row(r)) <= 1e-12) continue;
            auto [a, b] = canonical_hyperplane(p.C.row(r), p.c[r]);
            const std::size_t k = intern(planes, a, b);
            if (std::find(region_planes[i].begin(), region_planes[i].end(), k) == region_planes[i].end())
                region_planes[i].push_back(k);
        }
    }

    std::vector<Vector> centers(nr);
    for (std::size_t i = 0; i < nr; ++i) {
        const auto ball = chebyshev_ball(f.regions[i].region);
        require(ball && ball->radius > 0.0, ErrorKind::PreconditionViolated, "dc_decompose: empty region");
        centers[i] = ball->center;
    }
    auto gain = [&](std::size_t i) { return f.regions[i].K.row_vector(output); };
    auto value = [&](std::size_t i, std::span<const double> x) {
        return dot(f.regions[i].K.row(output), x) + f.regions[i].g[output];
    };

    // Minimal gradient jump across each hyperplane, over all facets on it.
    std::vector<double> min_jump(planes.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < nr; ++i) {
        for (std::size_t j = i + 1; j < nr; ++j) {
            for (std::size_t k : region_planes[i]) {
                if (std::find(region_planes[j].begin(), region_planes[j].end(), k) == region_planes[j].end()) continue;
                const Hyperplane& h = planes[k];
                const double si = dot(h.a, centers[i]) - h.b, sj = dot(h.a, centers[j]) - h.b;
                if (si * sj >= 0.0) continue;  // same side: not a facet between them
                const Polytope both = f.regions[i].region.intersect(f.regions[j].region);
                const auto ball = chebyshev_ball_on_hyperplane(both, h.a, h.b);
                if (!ball || ball->radius <= kFacetRadius) continue;
                if (std::abs(value(i, ball->center) - value(j, ball->center)) > kContinuityTol)
                    fail(ErrorKind::DiscontinuousInput, "PWA function jumps across a facet");
                const std::size_t left = si < 0.0 ? i : j, right = si < 0.0 ? j : i;
                const double mu = dot(sub(gain(right), gain(left)), h.a);
                min_jump[k] = std::min(min_jump[k], mu);
            }
        }
    }

    std::vector<std::size_t> ramps;
    std::vector<double> lambda(planes.size(), 0.0);
    for (std::size_t k = 0; k < planes.size(); ++k) {
        if (std::isfinite(min_jump[k]) && min_jump[k] < 0.0) {
            lambda[k] = -min_jump[k] + kRampMargin;
            ramps.push_back(k);
        }
    }

    // Split every region by the ramp hyperplanes; each cell has one sign pattern.
    DcDecomposition dc;
    std::vector<std::pair<Vector, std::size_t>> cell_centers;  // (center, index of its gamma piece)
    for (std::size_t i = 0; i < nr; ++i) {
        struct Cell {
            Polytope poly;
            std::vector<std::size_t> active;  // ramps on their positive side
        };
        std::vector<Cell> cells{{f.regions[i].region, {}}};
        for (std::size_t k : ramps) {
            std::vector<Cell> next;
            for (auto& cell : cells) {
                for (int side : {-1, 1}) {
                    Polytope sub_poly = with_side(cell.poly, planes[k], side);
                    const auto ball = chebyshev_ball(sub_poly);
                    if (!ball || ball->radius <= kCellRadius) continue;
                    Cell c{std::move(sub_poly), cell.active};
                    if (side > 0) c.active.push_back(k);
                    next.push_back(std::move(c));
                }
            }
            cells = std::move(next);
        }
        for (const auto& cell : cells) {
            AffinePiece g{gain(i), f.regions[i].g[output]};
            AffinePiece e{Vector(nx, 0.0), 0.0};
            for (std::size_t k : cell.active) {
                for (std::size_t j = 0; j < nx; ++j) e.a[j] += lambda[k] * planes[k].a[j];
                e.b -= lambda[k] * planes[k].b;
            }
            g.a = add(g.a, e.a);
            g.b += e.b;
            add_piece(dc.gamma.pieces, g);
            add_piece(dc.eta.pieces, e);
            cell_centers.emplace_back(chebyshev_ball(cell.poly)->center, i);
        }
    }

    // gamma must reproduce its own piece at every cell (convexity check).
    for (const auto& [x, i] : cell_centers) {
        double eta = 0.0;
        for (std::size_t k : ramps) eta += lambda[k] * std::max(0.0, dot(planes[k].a, x) - planes[k].b);
        const double err = std::abs(dc.gamma.value(x) - dc.eta.value(x) - value(i, x));
        if (err > 1e-7 || std::abs(dc.eta.value(x) - eta) > 1e-7)
            fail(ErrorKind::PreconditionViolated, "dc_decompose: partition is not a convex domain");
    }
    return dc;
}

}  // namespace empc
