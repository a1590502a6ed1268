#include "empc/mpc.hpp"

#include <bit>
#include <cstdio>

#include "empc/error.hpp"

namespace empc {

double CondensedMpc::cost(std::span<const double> x, std::span<const double> useq) const {
    require(x.size() == nx && useq.size() == num_vars(), ErrorKind::DimensionMismatch, "cost dims");
    return dot(useq, F * useq) + dot(x, G * useq) + dot(x, H * x);
}

QpProblem CondensedMpc::qp_at(std::span<const double> x) const {
    require(x.size() == nx, ErrorKind::DimensionMismatch, "qp_at: state dims");
    QpProblem p;
    p.H = F;
    p.q = transpose_times(G, x);
    p.A = Cc;
    p.b = T * x;
    for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] += cc[i];
    return p;
}

namespace {

std::string fingerprint_of(const CondensedMpc& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](double v) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (const Matrix* mat : {&m.F, &m.G, &m.H, &m.Cc, &m.T}) {
        mix(static_cast<double>(mat->rows()));
        mix(static_cast<double>(mat->cols()));
        for (double v : mat->data()) mix(v);
    }
    for (double v : m.cc) mix(v);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

CondensedMpc condense(const Scenario& s) {
    s.validate();
    const std::size_t nx = s.nx(), nu = s.nu(), N = s.N, nv = N * nu;
    const Matrix& A = s.system.A;
    const Matrix& B = s.system.B;

    CondensedMpc m;
    m.nx = nx;
    m.nu = nu;
    m.N = N;
    m.F = Matrix(nv, nv);
    m.G = Matrix(nx, nv);
    m.H = Matrix(nx, nx);
    m.Cc = Matrix(0, nv);
    m.T = Matrix(0, nx);

    // x_k = Φ_k·x + Γ_k·ũ
    Matrix phi = Matrix::identity(nx);
    Matrix gamma(nx, nv);

    auto add_state_rows = [&](const Polytope& poly) {
        for (std::size_t i = 0; i < poly.num_rows(); ++i) {
            const auto ci = poly.C.row(i);
            Vector crow(nv, 0.0), trow(nx, 0.0);
            for (std::size_t j = 0; j < nx; ++j) {
                if (ci[j] == 0.0) continue;
                for (std::size_t v = 0; v < nv; ++v) crow[v] += ci[j] * gamma(j, v);
                for (std::size_t q = 0; q < nx; ++q) trow[q] -= ci[j] * phi(j, q);
            }
            m.Cc.append_row(crow);
            m.T.append_row(trow);
            m.cc.push_back(poly.c[i]);
        }
    };
    auto add_stage_cost = [&](const Matrix& W) {
        const Matrix wg = W * gamma;
        const Matrix wphi = W * phi;
        m.F += transpose_times(gamma, wg);
        m.G += 2.0 * transpose_times(phi, wg);
        m.H += transpose_times(phi, wphi);
    };

    add_state_rows(s.X);
    for (std::size_t k = 0; k < N; ++k) {
        add_stage_cost(s.Q);
        for (std::size_t i = 0; i < s.U.num_rows(); ++i) {
            Vector crow(nv, 0.0);
            for (std::size_t j = 0; j < nu; ++j) crow[k * nu + j] = s.U.C(i, j);
            m.Cc.append_row(crow);
            m.T.append_row(Vector(nx, 0.0));
            m.cc.push_back(s.U.c[i]);
        }
        // Advance: x_{k+1} = A x_k + B u_k.
        gamma = A * gamma;
        for (std::size_t r = 0; r < nx; ++r)
            for (std::size_t j = 0; j < nu; ++j) gamma(r, k * nu + j) += B(r, j);
        phi = A * phi;
        add_state_rows(s.X);
        if (k + 1 == N && s.Xf) add_state_rows(*s.Xf);
    }
    add_stage_cost(s.P);
    for (std::size_t k = 0; k < N; ++k) m.F.set_block(k * nu, k * nu, m.F.block(k * nu, k * nu, nu, nu) + s.R);

    // Symmetrize against round-off.
    for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = i + 1; j < nv; ++j) m.F(i, j) = m.F(j, i) = 0.5 * (m.F(i, j) + m.F(j, i));
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = i + 1; j < nx; ++j) m.H(i, j) = m.H(j, i) = 0.5 * (m.H(i, j) + m.H(j, i));
    m.fingerprint = fingerprint_of(m);
    return m;
}

QpSolution solve_condensed(const CondensedMpc& m, std::span<const double> x) {
    require(all_finite(x), ErrorKind::PreconditionViolated, "state is not finite");
    return solve_qp(m.qp_at(x));
}

Vector mpc_control(const CondensedMpc& m, std::span<const double> x) {
    const QpSolution sol = solve_condensed(m, x);
    if (sol.status == QpStatus::Infeasible) fail(ErrorKind::Infeasible, "state outside the feasibility region");
    if (sol.status == QpStatus::MaxIter) fail(ErrorKind::MaxIter, "MPC QP hit the iteration cap");
    return Vector(sol.z.begin(), sol.z.begin() + static_cast<std::ptrdiff_t>(m.nu));
}

bool is_feasible(const CondensedMpc& m, std::span<const double> x) {
    const QpProblem p = m.qp_at(x);
    if (p.b.empty()) return true;
    const Vector zero(m.num_vars(), 0.0);
    const LpResult lp = solve_lp(zero, p.A, p.b);
    return lp.status == LpStatus::Optimal;
}

Dataset generate_dataset(const CondensedMpc& m, std::size_t n_tr, std::uint64_t seed, const Box& box, Exec exec) {
    require(n_tr >= 1, ErrorKind::PreconditionViolated, "generate_dataset: n_tr must be >= 1");
    require(box.dim() == m.nx, ErrorKind::DimensionMismatch, "generate_dataset: box dims");
    constexpr std::size_t kMaxDraws = 1000000;
    constexpr std::uint64_t kStream = 0x44415441;  // "DATA"

    Dataset ds;
    ds.seed = seed;
    ds.fingerprint = m.fingerprint;
    ds.points.resize(n_tr);
    std::vector<std::size_t> draws(n_tr, 0);

    for_each_index(n_tr, exec, [&](std::size_t i) {
        auto rng = index_stream(seed, kStream, i);
        Vector x(m.nx);
        for (std::size_t d = 1; d <= kMaxDraws; ++d) {
            for (std::size_t j = 0; j < m.nx; ++j) x[j] = uniform(rng, box.lo[j], box.hi[j]);
            const QpSolution sol = solve_condensed(m, x);
            if (sol.status == QpStatus::Infeasible) continue;
            if (sol.status != QpStatus::Optimal) fail(ErrorKind::MaxIter, "dataset label solve did not converge");
            ds.points[i] = {x, Vector(sol.z.begin(), sol.z.begin() + static_cast<std::ptrdiff_t>(m.nu))};
            draws[i] = d;
            return;
        }
        fail(ErrorKind::SamplingExhausted, "no feasible draw in 1e6 attempts for point " + std::to_string(i));
    });

    for (std::size_t d : draws) ds.draws += d;
    if (ds.draws >= kMaxDraws && static_cast<double>(n_tr) < 1e-3 * static_cast<double>(ds.draws))
        fail(ErrorKind::SamplingExhausted, "acceptance rate below 0.1%");
    return ds;
}

}  // namespace empc
