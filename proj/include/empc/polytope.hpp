#pragma once

#include <optional>
#include <span>

#include "empc/numerics.hpp"

namespace empc {

/// H-representation {x : C·x ≤ c}. Zero rows means the whole space.
struct Polytope {
    Matrix C;
    Vector c;

    Polytope() = default;
    Polytope(Matrix C_, Vector c_);

    /// Axis-aligned box lo ≤ x ≤ hi, rows ordered (+e_0 … +e_{d-1}, -e_0 … -e_{d-1}).
    static Polytope box(std::span<const double> lo, std::span<const double> hi);
    /// Symmetric box |x_i| ≤ bound_i.
    static Polytope symmetric_box(std::span<const double> bound);

    std::size_t dim() const noexcept { return C.cols(); }
    std::size_t num_rows() const noexcept { return c.size(); }
    bool contains(std::span<const double> x, double tol = 0.0) const;
    /// Largest violation max_i (C_i·x - c_i), or -inf for zero rows.
    double max_violation(std::span<const double> x) const;

    /// Stack rows of two polytopes of equal dimension.
    Polytope intersect(const Polytope& other) const;
};

struct ChebyshevBall {
    Vector center;
    double radius = 0.0;  ///< negative/zero when empty or flat; capped for unbounded sets
};

inline constexpr double kChebyshevCap = 1e6;

/// Largest inscribed ball. Returns nullopt when the polytope is empty.
std::optional<ChebyshevBall> chebyshev_ball(const Polytope& p);

/// Inscribed ball of the facet-like set P ∩ {x : a·x = b}, measured inside
/// the hyperplane. Rows of P parallel to a are treated as equality-compatible
/// only if they do not cut the hyperplane.
std::optional<ChebyshevBall> chebyshev_ball_on_hyperplane(const Polytope& p, std::span<const double> a, double b);

/// Drops rows that are implied by the others (LP test with tolerance tol) and
/// rows with a zero normal. Assumes p nonempty.
Polytope remove_redundant(const Polytope& p, double tol = 1e-9);

/// Axis bounds of p via LP; nullopt when unbounded or empty.
std::optional<std::pair<Vector, Vector>> bounding_box(const Polytope& p);

}  // namespace empc
