#pragma once

#include <optional>
#include <vector>

#include "empc/dynamics.hpp"
#include "empc/numerics.hpp"
#include "empc/polytope.hpp"

namespace empc {

/// u = K·x + g on {x : Z·x ≤ z}
struct PwaRegion {
    Polytope region;
    Matrix K;
    Vector g;
};

struct PwaFunction {
    std::vector<PwaRegion> regions;
    std::size_t nx = 0, nu = 0;

    /// Throws PreconditionViolated/DimensionMismatch on an empty or malformed law.
    void validate() const;
};

inline constexpr double kLocateTol = 1e-9;

/// Lowest-index region containing x (within tol), if any.
std::optional<std::size_t> locate(const PwaFunction& f, std::span<const double> x, double tol = kLocateTol);

/// Throws OutsidePartition when no region contains x.
Vector eval_pwa(const PwaFunction& f, std::span<const double> x);

/// v ↦ S·v + t
struct AffineTransform {
    Matrix S;
    Vector t;

    Vector apply(std::span<const double> v) const;
    Vector apply_inverse(std::span<const double> w) const;
    static AffineTransform identity(std::size_t n);
};

struct NormalizedPwa {
    AffineTransform Ax;  ///< state box → [0,1]^{n_x}
    AffineTransform Au;  ///< u ↦ u − lo
    PwaFunction f_hat;   ///< Au ∘ f ∘ Ax⁻¹
};

/// Checks that the partition lies inside state_box and that every output stays
/// within input_range (both by LP), then rewrites f on the unit cube.
NormalizedPwa normalize_domain(const PwaFunction& f, const Box& state_box, const Box& input_range);

struct AffinePiece {
    Vector a;
    double b = 0.0;

    double operator()(std::span<const double> x) const { return dot(a, x) + b; }
};

/// max_i (a_i·x + b_i)
struct ConvexPwa {
    std::vector<AffinePiece> pieces;

    std::size_t dim() const { return pieces.empty() ? 0 : pieces.front().a.size(); }
    double value(std::span<const double> x) const;
};

struct DcDecomposition {
    ConvexPwa gamma;
    ConvexPwa eta;
};

/// f_output = gamma − eta on the partition. Ramps λ_k·max(0, a_k·x − b_k) are
/// added on every hyperplane where f bends concavely; gamma = f + Σ ramps.
DcDecomposition dc_decompose(const PwaFunction& f, std::size_t output = 0);

/// Unit-norm row with its first nonzero coefficient positive.
std::pair<Vector, double> canonical_hyperplane(std::span<const double> a, double b);

}  // namespace empc
