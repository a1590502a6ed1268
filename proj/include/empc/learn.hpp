#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "empc/dynamics.hpp"
#include "empc/mpc.hpp"
#include "empc/pwa.hpp"
#include "empc/relunet.hpp"

namespace empc {

struct TrainConfig {
    std::size_t M = 6;
    std::size_t L = 6;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    /// Train on standardized inputs/outputs; the scaling is folded into the
    /// first and last layers of the returned network.
    bool standardize = true;

    void validate(std::size_t nx) const;
};

struct TrainResult {
    ReluNetwork net;
    double final_mse = 0.0;            ///< full-dataset MSE of the returned network
    std::vector<double> loss_history;  ///< full-dataset MSE after each epoch
};

TrainResult train_mlp(const Dataset& data, const TrainConfig& cfg);

/// Glorot-uniform weights from the seeded stream, zero biases.
ReluNetwork init_network(std::size_t nx, std::size_t nu, std::size_t M, std::size_t L, std::uint64_t seed);

/// Parameters in layer order: W_1 (row-major), b_1, W_2, b_2, …
Vector flatten(const ReluNetwork& n);
void unflatten(ReluNetwork& n, std::span<const double> params);

/// (1/n) Σ ||N(x_i) − u_i||²
double mse(const ReluNetwork& n, std::span<const DataPoint> points);
/// Same loss plus its gradient with respect to flatten(n), by backpropagation.
double mse_gradient(const ReluNetwork& n, std::span<const DataPoint> points, Vector& grad);

/// Central-difference gradient of mse with step h.
Vector finite_difference_gradient(const ReluNetwork& n, std::span<const DataPoint> points, double h = 1e-5);

struct AdamState {
    Vector m;
    Vector v;
    std::size_t t = 0;
};

struct AdamStep {
    Vector params;
    AdamState state;
};

/// One bias-corrected Adam step; pure function of its inputs.
AdamStep adam_update(std::span<const double> params, std::span<const double> grads, const AdamState& state,
                     const TrainConfig& cfg);

/// u_i = Σ_m coeffs(i, m) Π_j x_j^{i_j}; m enumerates exponent tuples with
/// i_1 varying fastest.
struct Polynomial {
    std::size_t degree = 0;
    std::size_t nx = 0;
    std::size_t nu = 0;
    Matrix coeffs;  ///< n_u × (p+1)^{n_x}

    std::size_t num_terms() const;
};

/// Full tensor monomial basis at x.
Vector monomials(std::span<const double> x, std::size_t degree);
Polynomial fit_polynomial(const Dataset& data, std::size_t degree);
Vector poly_eval(const Polynomial& p, std::span<const double> x);
std::size_t memory_footprint_poly(const Polynomial& p, std::size_t alpha_bit = 8);

struct PwaRefit {
    PwaFunction law;
    std::size_t kept_prior = 0;  ///< regions with too few points (or degenerate data)
    std::vector<std::size_t> counts;  ///< data points per region
};

/// Per-region affine least squares on the points located in each region.
PwaRefit fit_pwa_gains(const PwaFunction& partition, const Dataset& data);

/// Mean over the dataset of ||f(x) − u||²; points outside the partition are skipped.
double pwa_objective(const PwaFunction& f, const Dataset& data);

/// argmin ||u_raw − û||² s.t. U and, if given, A·x + B·û ∈ C_inv. Box U
/// without C_inv reduces to a clamp.
Vector project_feasible(std::span<const double> u_raw, std::span<const double> x, const LtiSystem& sys,
                        const Polytope& U, const std::optional<Polytope>& Cinv = std::nullopt);

/// Per-coordinate bounds when every row of U has a single nonzero entry.
std::optional<std::pair<Vector, Vector>> as_box(const Polytope& U);

}  // namespace empc
