#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "empc/mpc.hpp"
#include "empc/parallel.hpp"
#include "empc/pwa.hpp"

namespace empc {

/// One critical region of the condensed mpQP with the full-horizon gains
/// ũ*(x) = K·x + g and multipliers λ_A(x) = Λ·x + μ.
struct CriticalRegion {
    std::vector<std::size_t> active_set;  ///< ascending row indices of C_c
    Matrix K;
    Vector g;
    Matrix Lambda;
    Vector mu;
    Polytope region;
    ChebyshevBall ball;
};

struct ExplicitOptions {
    std::size_t max_active_set_size = std::numeric_limits<std::size_t>::max();
    double cheby_tol = 1e-7;
    std::size_t max_subsets = 1000000;
    Exec exec = Exec::Parallel;
};

struct ExplicitLaw {
    std::vector<CriticalRegion> regions;
    PwaFunction law;                  ///< first n_u rows of every region's gains
    std::size_t candidates = 0;       ///< active sets examined
    std::size_t degenerate_skipped = 0;  ///< candidates failing LICQ
};

/// Brute-force enumeration of active sets |A| ≤ min(N·n_u, max_active_set_size).
/// Rows of C_c that are identically zero (parameter-only rows) are never
/// active. Throws EnumerationBudgetExceeded above opts.max_subsets candidates.
ExplicitLaw enumerate_explicit(const CondensedMpc& m, const ExplicitOptions& opts = {});

struct PwaMemory {
    std::size_t bytes = 0;
    std::size_t n_h = 0;  ///< unique hyperplanes
    std::size_t n_f = 0;  ///< unique feedback laws
};

PwaMemory memory_footprint_pwa(const PwaFunction& f, std::size_t alpha_bit = 8, double dedup_tol = 1e-6);

}  // namespace empc
