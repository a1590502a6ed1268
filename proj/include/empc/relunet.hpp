#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>
#include <utility>
#include <vector>

#include "empc/dynamics.hpp"
#include "empc/numerics.hpp"
#include "empc/pwa.hpp"

namespace empc {

/// Affine layer y = W·v + b.
struct Layer {
    Matrix W;
    Vector b;
};

/// Feed-forward ReLU network: L hidden layers of uniform width M, ReLU after
/// every hidden layer, affine output layer.
struct ReluNetwork {
    std::vector<Layer> layers;  ///< L hidden layers followed by the output layer

    std::size_t depth() const noexcept { return layers.empty() ? 0 : layers.size() - 1; }
    std::size_t width() const noexcept { return layers.empty() ? 0 : layers.front().W.rows(); }
    std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().W.cols(); }
    std::size_t output_dim() const noexcept { return layers.empty() ? 0 : layers.back().W.rows(); }

    /// Throws DimensionMismatch unless the layer chain is consistent and uniform.
    void validate() const;
};

Vector eval_network(const ReluNetwork& n, std::span<const double> x);

/// (n_x+1)M + (L−1)(M+1)M + (M+1)n_u
std::size_t param_count(std::size_t nx, std::size_t nu, std::size_t M, std::size_t L);
std::size_t param_count(const ReluNetwork& n);
std::size_t memory_footprint_net(const ReluNetwork& n, std::size_t alpha_bit = 8);

/// bytes / 1024 with two decimals, e.g. "1.93".
std::string format_kb(std::size_t bytes);

using BigInt = boost::multiprecision::cpp_int;

/// (∏_{l=1}^{L−1} ⌊M/n_x⌋^{n_x}) · Σ_{j=0}^{n_x} C(L, j)
BigInt region_lower_bound(std::size_t nx, std::size_t M, std::size_t L);

/// Network of width n_x+1 and depth pieces.size() computing max_i(a_i·x + b_i)
/// exactly on [0,1]^{n_x}. Layer l carries x unchanged (x ≥ 0 on the cube)
/// and u_l = ReLU(m_{l−1}(x) − f̃_l(x)), with the running maximum
/// m_l = u_l + f̃_l affine in the layer's inputs.
ReluNetwork build_max_network(const ConvexPwa& pieces);

/// u = Au⁻¹(net_γ(Ax·x) − net_η(Ax·x)) per output.
struct ExactRepresentation {
    AffineTransform Ax;
    AffineTransform Au;
    std::vector<std::pair<ReluNetwork, ReluNetwork>> pairs;  ///< (γ, η) per output

    Vector eval(std::span<const double> x) const;
};

ExactRepresentation exact_mpc_network(const PwaFunction& f, const Box& state_box, const Box& input_range);

/// Largest |rep(x) − f(x)|∞ over the first n_samples Halton points of the box
/// plus its vertices, restricted to points inside the partition.
struct ProxError {
    double max_error = 0.0;
    std::size_t points = 0;  ///< evaluated points inside the partition
};
ProxError max_sampled_error(const PwaFunction& f, const ExactRepresentation& rep, const Box& state_box,
                            std::size_t n_samples = 10000);

/// i-th point of the Halton sequence in [0,1]^dim (i ≥ 1 skips the origin).
Vector halton_point(std::size_t i, std::size_t dim);

}  // namespace empc
