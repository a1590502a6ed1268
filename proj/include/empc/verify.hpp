#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "empc/dynamics.hpp"
#include "empc/parallel.hpp"

namespace empc {

/// Slack allowed when checking trajectory constraints; absorbs rounding on
/// states that sit exactly on an active constraint.
inline constexpr double kLabelTol = 1e-9;

/// +1 iff every state and input of the trajectory satisfies X and U.
int mtl_label(const Trajectory& traj, const Polytope& X, const Polytope& U);

struct LabeledPoint {
    Vector x0;
    int label = 0;  ///< ±1
};

struct LabeledInitialSet {
    std::vector<LabeledPoint> points;
    std::string provenance;
    std::uint64_t seed = 0;

    std::size_t count(int label) const;
    std::vector<Vector> states(int label) const;
};

/// n uniform draws from the box; draw i depends only on (seed, stream, i).
std::vector<Vector> draw_initial_states(const Box& box, std::size_t n, std::uint64_t seed, std::uint64_t stream);

/// Rolls out from each initial state for s.k_end steps and labels the
/// trajectory. A controller that fails along the way yields −1.
LabeledInitialSet label_initial_states(const Scenario& s, const Controller& controller, std::span<const Vector> x0s,
                                       std::string provenance, std::uint64_t seed, Exec exec = Exec::Parallel);

struct LabelSizes {
    std::size_t g = 20000;
    std::size_t t = 10000;
    std::size_t v = 40000;
};

struct LabeledSets {
    LabeledInitialSet G, T, V;
};

/// G, T and V use separate streams, so T is identical across controllers for
/// the same seed.
LabeledSets generate_labeled_sets(const Controller& controller, const Scenario& s, const LabelSizes& sizes,
                                  std::uint64_t seed, const std::string& provenance, Exec exec = Exec::Parallel);
/// Stream of the T set (shared by every controller).
inline constexpr std::uint64_t kStreamT = 0x54534554;

struct EllipsoidSafeSet {
    Matrix E;
    double epsilon = 0.0;
};

struct EllipsoidOptions {
    double epsilon = 0.05;
    double floor = 0.0;     ///< lower bound on the eigenvalues of E
    double gap_tol = 1e-9;  ///< barrier duality-gap target, relative to max(1, trace)
};

/// min tr(E)  s.t.  E ⪰ floor·I,  xᵀEx ≥ 1 + ε for every invalid x ∈ ℝⁿ.
EllipsoidSafeSet fit_ellipsoid(std::size_t n, std::span<const Vector> invalid, const EllipsoidOptions& opt);

bool ellipsoid_contains(const EllipsoidSafeSet& s, std::span<const double> x);

struct SvmSafeSet {
    std::vector<Vector> support_vectors;
    Vector coef;  ///< α_i·y_i
    double bias = 0.0;
    double nu = 1.0;  ///< RBF width: κ(x, y) = exp(−ν‖x − y‖²)
    double C = 10.0;
    std::size_t iterations = 0;
    double kkt_violation = 0.0;
};

struct SvmOptions {
    double C = 10.0;
    double nu = 0.0;  ///< 0 → 1/n_x
    double tol = 1e-5;
    std::size_t cache_mb = 256;
    std::size_t max_iter = 0;  ///< 0 → max(10⁷, 100·n)
};

SvmSafeSet fit_svm(const LabeledInitialSet& data, const SvmOptions& opt);
double svm_decision(const SvmSafeSet& s, std::span<const double> x);
/// sign of the decision function; ties go to +1.
int svm_classify(const SvmSafeSet& s, std::span<const double> x);

using SafeSet = std::function<bool(const Vector&)>;

/// |T_dnn⁺| / |T_exp⁺|; both sets must share their initial states.
double metric_m_dir(const LabeledInitialSet& T_dnn, const LabeledInitialSet& T_exp);
/// Share of T_exp⁺ initial states that lie in the safe set.
double metric_m_vol(const SafeSet& safe, const LabeledInitialSet& T_dnn, const LabeledInitialSet& T_exp);
/// Share of invalid points among the V points inside the safe set.
double metric_m_fp(const SafeSet& safe, const LabeledInitialSet& V);

struct SafeCounts {
    std::size_t inside = 0;  ///< n_s
    std::size_t valid = 0;   ///< n_+
};
SafeCounts count_in_safe_set(const SafeSet& safe, const LabeledInitialSet& V);

double empirical_risk(std::size_t n_plus, std::size_t n_s);
/// 1 − 2·exp(−2·n_s·δ²)
double hoeffding(std::size_t n_s, double delta);

}  // namespace empc
