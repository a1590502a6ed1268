#include "empc/mpqp.hpp"

#include <algorithm>
#include <cmath>

#include "empc/error.hpp"

namespace empc {

namespace {

// Number of subsets of size ≤ k drawn from n, saturating at cap + 1.
std::size_t subset_count(std::size_t n, std::size_t k, std::size_t cap) {
    std::size_t total = 0;
    double binom = 1.0;
    for (std::size_t j = 0; j <= k && j <= n; ++j) {
        if (j > 0) binom = binom * static_cast<double>(n - j + 1) / static_cast<double>(j);
        total += static_cast<std::size_t>(std::llround(std::min(binom, static_cast<double>(cap) + 1.0)));
        if (total > cap) return cap + 1;
    }
    return total;
}

void append_combinations(const std::vector<std::size_t>& pool, std::size_t k,
                         std::vector<std::vector<std::size_t>>& out) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        std::vector<std::size_t> set(k);
        for (std::size_t i = 0; i < k; ++i) set[i] = pool[idx[i]];
        out.push_back(std::move(set));
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == pool.size() - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

enum class Outcome { Region, Empty, Degenerate };

struct Candidate {
    Outcome outcome = Outcome::Empty;
    CriticalRegion region;
};

Candidate examine(const CondensedMpc& m, const Cholesky& two_f, const std::vector<std::size_t>& active,
                  double cheby_tol) {
    const std::size_t nx = m.nx, nv = m.num_vars(), nc = m.num_constraints(), na = active.size();
    Candidate out;

    // ũ = -(2F)⁻¹(Gᵀx + C_Aᵀλ)
    const Matrix gt = m.G.transpose();
    const Matrix finv_gt = two_f.solve(gt);  // nv × nx
    Matrix K = finv_gt * -1.0;
    Vector g(nv, 0.0);
    Matrix Lambda(na, nx);
    Vector mu(na, 0.0);

    if (na > 0) {
        const Matrix ca = m.Cc.select_rows(active);
        const Matrix ta = m.T.select_rows(active);
        Vector caa(na);
        for (std::size_t i = 0; i < na; ++i) caa[i] = m.cc[active[i]];
        const Matrix finv_cat = two_f.solve(ca.transpose());  // nv × na
        Matrix S = ca * finv_cat;
        S = (S + S.transpose()) * 0.5;
        // LICQ: reject nearly dependent active gradients.
        const SymEig se = sym_eig(S);
        if (se.values.back() <= 1e-10 * std::max(1.0, se.values.front())) {
            out.outcome = Outcome::Degenerate;
            return out;
        }
        const Cholesky s_chol(S);
        Lambda = s_chol.solve(ca * finv_gt + ta) * -1.0;
        mu = scale(s_chol.solve(caa), -1.0);
        K -= finv_cat * Lambda;
        g = scale(finv_cat * mu, -1.0);
    }

    // λ(x) ≥ 0 on active rows; primal feasibility on the others.
    Matrix Z(0, nx);
    Vector z;
    for (std::size_t i = 0; i < na; ++i) {
        Z.append_row(scale(Lambda.row(i), -1.0));
        z.push_back(mu[i]);
    }
    const Matrix ck = m.Cc * K;
    const Vector cg = m.Cc * g;
    std::size_t next_active = 0;
    for (std::size_t r = 0; r < nc; ++r) {
        if (next_active < na && active[next_active] == r) {
            ++next_active;
            continue;
        }
        Vector row(nx);
        for (std::size_t j = 0; j < nx; ++j) row[j] = ck(r, j) - m.T(r, j);
        Z.append_row(row);
        z.push_back(m.cc[r] - cg[r]);
    }
    // Rows with zero normal are either vacuous or make the region empty.
    Matrix Zk(0, nx);
    Vector zk;
    for (std::size_t i = 0; i < Z.rows(); ++i) {
        if (norm_inf(Z.row(i)) <= 1e-12) {
            if (z[i] < -1e-12) return out;
            continue;
        }
        Zk.append_row(Z.row(i));
        zk.push_back(z[i]);
    }
    Polytope region(std::move(Zk), std::move(zk));
    const auto ball = chebyshev_ball(region);
    if (!ball || ball->radius <= cheby_tol) return out;

    out.outcome = Outcome::Region;
    out.region.active_set = active;
    out.region.K = std::move(K);
    out.region.g = std::move(g);
    out.region.Lambda = std::move(Lambda);
    out.region.mu = std::move(mu);
    out.region.region = remove_redundant(region);
    out.region.ball = *ball;
    return out;
}

}  // namespace

ExplicitLaw enumerate_explicit(const CondensedMpc& m, const ExplicitOptions& opts) {
    const std::size_t nv = m.num_vars(), nc = m.num_constraints();
    require(nv > 0, ErrorKind::PreconditionViolated, "enumerate_explicit: no decision variables");
    const Cholesky two_f(m.F * 2.0);

    std::vector<std::size_t> pool;
    for (std::size_t r = 0; r < nc; ++r)
        if (norm_inf(m.Cc.row(r)) > 0.0) pool.push_back(r);
    const std::size_t kmax = std::min({nv, opts.max_active_set_size, pool.size()});
    if (subset_count(pool.size(), kmax, opts.max_subsets) > opts.max_subsets)
        fail(ErrorKind::EnumerationBudgetExceeded, "active-set enumeration exceeds the subset budget");

    std::vector<std::vector<std::size_t>> sets;
    for (std::size_t k = 0; k <= kmax; ++k) append_combinations(pool, k, sets);

    std::vector<Candidate> results(sets.size());
    for_each_index(sets.size(), opts.exec,
                   [&](std::size_t i) { results[i] = examine(m, two_f, sets[i], opts.cheby_tol); });

    ExplicitLaw law;
    law.candidates = sets.size();
    for (auto& r : results) {
        if (r.outcome == Outcome::Degenerate) ++law.degenerate_skipped;
        if (r.outcome == Outcome::Region) law.regions.push_back(std::move(r.region));
    }
    std::sort(law.regions.begin(), law.regions.end(),
              [](const CriticalRegion& a, const CriticalRegion& b) { return a.active_set < b.active_set; });

    law.law.nx = m.nx;
    law.law.nu = m.nu;
    for (const auto& r : law.regions)
        law.law.regions.push_back({r.region, r.K.block(0, 0, m.nu, m.nx),
                                   Vector(r.g.begin(), r.g.begin() + static_cast<std::ptrdiff_t>(m.nu))});
    return law;
}

PwaMemory memory_footprint_pwa(const PwaFunction& f, std::size_t alpha_bit, double dedup_tol) {
    f.validate();
    std::vector<std::pair<Vector, double>> planes;
    std::vector<std::pair<Matrix, Vector>> laws;
    auto close = [dedup_tol](std::span<const double> a, std::span<const double> b) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - b[i]) > dedup_tol) return false;
        return true;
    };
    for (const auto& r : f.regions) {
        for (std::size_t i = 0; i < r.region.num_rows(); ++i) {
            if (norm2(r.region.C.row(i)) <= 1e-12) continue;
            auto h = canonical_hyperplane(r.region.C.row(i), r.region.c[i]);
            const bool seen = std::any_of(planes.begin(), planes.end(), [&](const auto& p) {
                return std::abs(p.second - h.second) <= dedup_tol && close(p.first, h.first);
            });
            if (!seen) planes.push_back(std::move(h));
        }
        const bool seen = std::any_of(laws.begin(), laws.end(), [&](const auto& l) {
            return close(l.first.data(), r.K.data()) && close(l.second, r.g);
        });
        if (!seen) laws.emplace_back(r.K, r.g);
    }
    PwaMemory mem;
    mem.n_h = planes.size();
    mem.n_f = laws.size();
    mem.bytes = alpha_bit * (mem.n_h * (f.nx + 1) + mem.n_f * (f.nx * f.nu + f.nu));
    return mem;
}

}  // namespace empc
