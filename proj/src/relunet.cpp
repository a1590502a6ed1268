#include "empc/relunet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "empc/error.hpp"

namespace empc {

void ReluNetwork::validate() const {
    require(layers.size() >= 2, ErrorKind::DimensionMismatch, "network needs a hidden and an output layer");
    const std::size_t M = width();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        require(layer.b.size() == layer.W.rows(), ErrorKind::DimensionMismatch, "bias length");
        if (l + 1 < layers.size())
            require(layer.W.rows() == M, ErrorKind::DimensionMismatch, "hidden width is not uniform");
        if (l > 0) require(layer.W.cols() == M, ErrorKind::DimensionMismatch, "layer input width");
    }
}

Vector eval_network(const ReluNetwork& n, std::span<const double> x) {
    require(!n.layers.empty() && x.size() == n.input_dim(), ErrorKind::DimensionMismatch, "eval_network: input dims");
    Vector v(x.begin(), x.end());
    for (std::size_t l = 0; l < n.layers.size(); ++l) {
        const Layer& layer = n.layers[l];
        Vector next = layer.W * v;
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += layer.b[i];
        if (l + 1 < n.layers.size())
            for (double& t : next) t = std::max(0.0, t);
        v = std::move(next);
    }
    return v;
}

std::size_t param_count(std::size_t nx, std::size_t nu, std::size_t M, std::size_t L) {
    require(L >= 1, ErrorKind::PreconditionViolated, "param_count: L >= 1");
    return (nx + 1) * M + (L - 1) * (M + 1) * M + (M + 1) * nu;
}

std::size_t param_count(const ReluNetwork& n) {
    n.validate();
    return param_count(n.input_dim(), n.output_dim(), n.width(), n.depth());
}

std::size_t memory_footprint_net(const ReluNetwork& n, std::size_t alpha_bit) { return alpha_bit * param_count(n); }

std::string format_kb(std::size_t bytes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(bytes) / 1024.0);
    return buf;
}

BigInt region_lower_bound(std::size_t nx, std::size_t M, std::size_t L) {
    require(nx >= 1 && L >= 1, ErrorKind::PreconditionViolated, "region_lower_bound: n_x, L >= 1");
    require(M >= nx, ErrorKind::PreconditionViolated, "region_lower_bound: M must be >= n_x");
    const BigInt per_layer = boost::multiprecision::pow(BigInt(M / nx), static_cast<unsigned>(nx));
    BigInt product = 1;
    for (std::size_t l = 1; l < L; ++l) product *= per_layer;
    BigInt sum = 0, binom = 1;  // C(L, j)
    for (std::size_t j = 0; j <= nx && j <= L; ++j) {
        if (j > 0) binom = binom * (L - j + 1) / j;
        sum += binom;
    }
    return product * sum;
}

ReluNetwork build_max_network(const ConvexPwa& f) {
    require(!f.pieces.empty(), ErrorKind::EmptyPieces, "build_max_network: no pieces");
    const std::size_t nx = f.dim(), N = f.pieces.size(), M = nx + 1;
    require(nx >= 1, ErrorKind::DimensionMismatch, "build_max_network: zero input dimension");
    for (const auto& p : f.pieces) require(p.a.size() == nx, ErrorKind::DimensionMismatch, "piece dimension");

    // Shift so every piece is ≥ 1 on the cube; the minimum of an affine
    // function over the cube sits at a vertex: b + Σ min(a_j, 0).
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& p : f.pieces) {
        double v = p.b;
        for (double a : p.a) v += std::min(a, 0.0);
        lowest = std::min(lowest, v);
    }
    const double c = std::max(0.0, -lowest) + 1.0;

    ReluNetwork net;
    // Units 0..nx-1 carry x, unit nx carries u_l.
    auto pass_through = [&](Layer& layer) {
        for (std::size_t j = 0; j < nx; ++j) layer.W(j, j) = 1.0;
    };
    {
        Layer first{Matrix(M, nx), Vector(M, 0.0)};
        pass_through(first);
        for (std::size_t j = 0; j < nx; ++j) first.W(nx, j) = f.pieces[0].a[j];
        first.b[nx] = f.pieces[0].b + c;
        net.layers.push_back(std::move(first));
    }
    // m_{l−1} = u_{l−1} + φ_{l−1}(x), φ_1 = 0, φ_l = f̃_l.
    for (std::size_t l = 1; l < N; ++l) {
        Layer layer{Matrix(M, M), Vector(M, 0.0)};
        pass_through(layer);
        layer.W(nx, nx) = 1.0;
        const AffinePiece& cur = f.pieces[l];
        for (std::size_t j = 0; j < nx; ++j) layer.W(nx, j) = -cur.a[j];
        layer.b[nx] = -(cur.b + c);
        if (l >= 2) {
            const AffinePiece& prev = f.pieces[l - 1];
            for (std::size_t j = 0; j < nx; ++j) layer.W(nx, j) += prev.a[j];
            layer.b[nx] += prev.b + c;
        }
        net.layers.push_back(std::move(layer));
    }
    // Output m_N − c = u_N + φ_N(x) − c.
    Layer out{Matrix(1, M), Vector(1, -c)};
    out.W(0, nx) = 1.0;
    if (N >= 2) {
        const AffinePiece& last = f.pieces[N - 1];
        for (std::size_t j = 0; j < nx; ++j) out.W(0, j) = last.a[j];
        out.b[0] += last.b + c;
    }
    net.layers.push_back(std::move(out));
    return net;
}

Vector ExactRepresentation::eval(std::span<const double> x) const {
    const Vector xh = Ax.apply(x);
    Vector v(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        v[i] = eval_network(pairs[i].first, xh)[0] - eval_network(pairs[i].second, xh)[0];
    return Au.apply_inverse(v);
}

ExactRepresentation exact_mpc_network(const PwaFunction& f, const Box& state_box, const Box& input_range) {
    const NormalizedPwa n = normalize_domain(f, state_box, input_range);
    ExactRepresentation rep{n.Ax, n.Au, {}};
    for (std::size_t i = 0; i < f.nu; ++i) {
        const DcDecomposition dc = dc_decompose(n.f_hat, i);
        rep.pairs.emplace_back(build_max_network(dc.gamma), build_max_network(dc.eta));
    }
    return rep;
}

Vector halton_point(std::size_t i, std::size_t dim) {
    static constexpr std::size_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    require(dim <= std::size(primes), ErrorKind::PreconditionViolated, "halton_point: dimension too large");
    Vector p(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        double f = 1.0, r = 0.0;
        for (std::size_t k = i; k > 0; k /= primes[d]) {
            f /= static_cast<double>(primes[d]);
            r += f * static_cast<double>(k % primes[d]);
        }
        p[d] = r;
    }
    return p;
}

ProxError max_sampled_error(const PwaFunction& f, const ExactRepresentation& rep, const Box& state_box,
                            std::size_t n_samples) {
    const std::size_t nx = f.nx;
    require(state_box.dim() == nx, ErrorKind::DimensionMismatch, "max_sampled_error: box dims");
    std::vector<Vector> unit;
    for (std::size_t i = 1; i <= n_samples; ++i) unit.push_back(halton_point(i, nx));
    for (std::size_t mask = 0; mask < (std::size_t{1} << nx); ++mask) {
        Vector v(nx);
        for (std::size_t j = 0; j < nx; ++j) v[j] = (mask >> j) & 1U ? 1.0 : 0.0;
        unit.push_back(std::move(v));
    }
    ProxError e;
    for (const Vector& u : unit) {
        Vector x(nx);
        for (std::size_t j = 0; j < nx; ++j) x[j] = state_box.lo[j] + u[j] * (state_box.hi[j] - state_box.lo[j]);
        if (!locate(f, x)) continue;
        ++e.points;
        e.max_error = std::max(e.max_error, norm_inf(sub(rep.eval(x), eval_pwa(f, x))));
    }
    return e;
}

}  // namespace empc
