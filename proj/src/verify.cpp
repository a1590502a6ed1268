#include "empc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "empc/error.hpp"

namespace empc {

int mtl_label(const Trajectory& traj, const Polytope& X, const Polytope& U) {
    for (const auto& x : traj.states)
        if (!X.contains(x, kLabelTol)) return -1;
    for (const auto& u : traj.inputs)
        if (!U.contains(u, kLabelTol)) return -1;
    return 1;
}

std::size_t LabeledInitialSet::count(int label) const {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [&](const LabeledPoint& p) { return p.label == label; }));
}

std::vector<Vector> LabeledInitialSet::states(int label) const {
    std::vector<Vector> out;
    for (const auto& p : points)
        if (p.label == label) out.push_back(p.x0);
    return out;
}

std::vector<Vector> draw_initial_states(const Box& box, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    std::vector<Vector> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = index_stream(seed, stream, i);
        Vector x(box.dim());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = uniform(rng, box.lo[j], box.hi[j]);
        out[i] = std::move(x);
    }
    return out;
}

LabeledInitialSet label_initial_states(const Scenario& s, const Controller& controller, std::span<const Vector> x0s,
                                       std::string provenance, std::uint64_t seed, Exec exec) {
    LabeledInitialSet out{std::vector<LabeledPoint>(x0s.size()), std::move(provenance), seed};
    for_each_index(x0s.size(), exec, [&](std::size_t i) {
        int label = -1;
        try {
            label = mtl_label(rollout(s.system, controller, x0s[i], s.k_end), s.X, s.U);
        } catch (const Error&) {
            // An inapplicable controller is unsafe from this state.
        }
        out.points[i] = {x0s[i], label};
    });
    return out;
}

LabeledSets generate_labeled_sets(const Controller& controller, const Scenario& s, const LabelSizes& sizes,
                                  std::uint64_t seed, const std::string& provenance, Exec exec) {
    require(sizes.g >= 1 && sizes.t >= 1 && sizes.v >= 1, ErrorKind::PreconditionViolated,
            "generate_labeled_sets: sizes must be >= 1");
    constexpr std::uint64_t kStreamG = 0x47534554, kStreamV = 0x56534554;
    auto make = [&](std::size_t n, std::uint64_t stream) {
        const auto x0s = draw_initial_states(s.sample_box, n, seed, stream);
        return label_initial_states(s, controller, x0s, provenance, seed, exec);
    };
    return {make(sizes.g, kStreamG), make(sizes.t, kStreamT), make(sizes.v, kStreamV)};
}

// ---------------------------------------------------------------------------
// Ellipsoid: log-barrier interior point on the n(n+1)/2 entries of E.

namespace {

struct SymBasis {
    std::size_t n;
    std::vector<std::pair<std::size_t, std::size_t>> idx;  // (i, j), i ≤ j

    explicit SymBasis(std::size_t n_) : n(n_) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) idx.emplace_back(i, j);
    }
    std::size_t size() const { return idx.size(); }
    Matrix to_matrix(const Vector& e) const {
        Matrix E(n, n);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            E(idx[a].first, idx[a].second) = e[a];
            E(idx[a].second, idx[a].first) = e[a];
        }
        return E;
    }
    // xᵀ B_a x for every basis element.
    Vector features(std::span<const double> x) const {
        Vector f(idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const auto [i, j] = idx[a];
            f[a] = i == j ? x[i] * x[i] : 2.0 * x[i] * x[j];
        }
        return f;
    }
};

struct BarrierPoint {
    bool feasible = false;
    double value = 0.0;
    Matrix Sinv;  // (E − floor·I)⁻¹
    Vector slack;
};

}  // namespace

EllipsoidSafeSet fit_ellipsoid(std::size_t n, std::span<const Vector> invalid, const EllipsoidOptions& opt) {
    require(opt.epsilon >= 0.0 && opt.floor >= 0.0 && opt.gap_tol > 0.0, ErrorKind::PreconditionViolated,
            "fit_ellipsoid: epsilon and floor must be >= 0");
    require(n >= 1, ErrorKind::PreconditionViolated, "fit_ellipsoid: dimension must be >= 1");
    if (invalid.empty()) return {opt.floor * Matrix::identity(n), opt.epsilon};
    const double rhs = 1.0 + opt.epsilon;
    double min_sq = std::numeric_limits<double>::infinity();
    for (const auto& x : invalid) {
        require(x.size() == n, ErrorKind::DimensionMismatch, "fit_ellipsoid: point dimension");
        require(all_finite(x), ErrorKind::PreconditionViolated, "fit_ellipsoid: non-finite point");
        min_sq = std::min(min_sq, dot(x, x));
    }
    if (!(min_sq > 0.0)) fail(ErrorKind::InfeasibleMargin, "fit_ellipsoid: invalid point at the origin");

    const SymBasis basis(n);
    const std::size_t d = basis.size(), m = invalid.size();
    std::vector<Vector> feat(m);
    for (std::size_t k = 0; k < m; ++k) feat[k] = basis.features(invalid[k]);
    Vector cost(d, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        if (basis.idx[a].first == basis.idx[a].second) cost[a] = 1.0;

    auto evaluate = [&](const Vector& e, double t) {
        BarrierPoint p;
        Matrix shifted = basis.to_matrix(e);
        for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= opt.floor;
        const SymEig eig = sym_eig(shifted);
        if (!(eig.values[n - 1] > 0.0)) return p;
        p.slack.resize(m);
        double logs = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            p.slack[k] = dot(feat[k], e) - rhs;
            if (!(p.slack[k] > 0.0)) return p;
            logs += std::log(p.slack[k]);
        }
        double logdet = 0.0;
        for (double v : eig.values) logdet += std::log(v);
        p.Sinv = Matrix(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t r = 0; r < n; ++r) acc += eig.vectors(i, r) * eig.vectors(j, r) / eig.values[r];
                p.Sinv(i, j) = acc;
            }
        p.feasible = true;
        p.value = t * dot(cost, e) - logdet - logs;
        return p;
    };

    // Strictly feasible start: a multiple of the identity.
    Vector e(d, 0.0);
    const double s0 = std::max(opt.floor + 1.0, 2.0 * rhs / min_sq);
    for (std::size_t a = 0; a < d; ++a)
        if (basis.idx[a].first == basis.idx[a].second) e[a] = s0;

    const double barrier_weight = static_cast<double>(n + m);
    double t = barrier_weight / std::max(1.0, dot(cost, e));
    for (int outer = 0; outer < 200; ++outer) {
        for (int it = 0; it < 200; ++it) {
            const BarrierPoint p = evaluate(e, t);
            Vector grad = scale(cost, t);
            Matrix hess(d, d);
            // −log det(E − floor·I): gradient −tr(S B_a), Hessian tr(S B_a S B_b).
            for (std::size_t a = 0; a < d; ++a) {
                const auto [i, j] = basis.idx[a];
                grad[a] -= i == j ? p.Sinv(i, i) : 2.0 * p.Sinv(i, j);
            }
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = a; b < d; ++b) {
                    const auto [i, j] = basis.idx[a];
                    const auto [k, l] = basis.idx[b];
                    // tr(S B_a S B_b) with B = e_i e_jᵀ (+ e_j e_iᵀ when i ≠ j)
                    auto term = [&](std::size_t p1, std::size_t q1, std::size_t p2, std::size_t q2) {
                        return p.Sinv(q1, p2) * p.Sinv(q2, p1);
                    };
                    double v = 0.0;
                    std::vector<std::pair<std::size_t, std::size_t>> ea{{i, j}}, eb{{k, l}};
                    if (i != j) ea.emplace_back(j, i);
                    if (k != l) eb.emplace_back(l, k);
                    for (const auto& [p1, q1] : ea)
                        for (const auto& [p2, q2] : eb) v += term(p1, q1, p2, q2);
                    hess(a, b) = v;
                    hess(b, a) = v;
                }
            for (std::size_t k = 0; k < m; ++k) {
                const double inv = 1.0 / p.slack[k];
                for (std::size_t a = 0; a < d; ++a) {
                    grad[a] -= feat[k][a] * inv;
                    for (std::size_t b = 0; b < d; ++b) hess(a, b) += feat[k][a] * feat[k][b] * inv * inv;
                }
            }
            const Vector step = scale(lu_solve(hess, grad), -1.0);
            const double decrement = -dot(grad, step);
            if (decrement <= 1e-12) break;
            double alpha = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 80; ++ls, alpha *= 0.5) {
                const Vector trial = add(e, scale(step, alpha));
                const BarrierPoint q = evaluate(trial, t);
                if (q.feasible && q.value <= p.value - 0.25 * alpha * decrement) {
                    e = trial;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        if (barrier_weight / t <= opt.gap_tol * std::max(1.0, dot(cost, e))) break;
        t *= 10.0;
    }

    EllipsoidSafeSet out{basis.to_matrix(e), opt.epsilon};
    return out;
}

bool ellipsoid_contains(const EllipsoidSafeSet& s, std::span<const double> x) {
    require(x.size() == s.E.rows(), ErrorKind::DimensionMismatch, "ellipsoid_contains: dimension");
    return dot(x, s.E * x) <= 1.0;
}

// ---------------------------------------------------------------------------
// SVM: dual soft-margin problem by SMO with second-order working-set selection.

namespace {

class KernelCache {
public:
    KernelCache(const std::vector<Vector>& x, double nu, std::size_t capacity_rows)
        : x_(x), nu_(nu), capacity_(std::max<std::size_t>(2, capacity_rows)) {}

    const Vector& row(std::size_t i) {
        if (auto it = map_.find(i); it != map_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.second);
            return it->second.first;
        }
        if (map_.size() >= capacity_) {
            map_.erase(lru_.back());
            lru_.pop_back();
        }
        Vector r(x_.size());
        const auto n = static_cast<std::ptrdiff_t>(x_.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t t = 0; t < n; ++t) r[static_cast<std::size_t>(t)] = value(i, static_cast<std::size_t>(t));
        lru_.push_front(i);
        return map_.emplace(i, std::make_pair(std::move(r), lru_.begin())).first->second.first;
    }

    double value(std::size_t i, std::size_t j) const {
        double d2 = 0.0;
        for (std::size_t k = 0; k < x_[i].size(); ++k) d2 += (x_[i][k] - x_[j][k]) * (x_[i][k] - x_[j][k]);
        return std::exp(-nu_ * d2);
    }

private:
    const std::vector<Vector>& x_;
    double nu_;
    std::size_t capacity_;
    std::list<std::size_t> lru_;
    std::unordered_map<std::size_t, std::pair<Vector, std::list<std::size_t>::iterator>> map_;
};

double rbf(std::span<const double> a, std::span<const double> b, double nu) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    return std::exp(-nu * d2);
}

}  // namespace

SvmSafeSet fit_svm(const LabeledInitialSet& data, const SvmOptions& opt) {
    const std::size_t n = data.points.size();
    require(n >= 2, ErrorKind::SingleClassInput, "fit_svm: need both labels");
    const std::size_t nx = data.points.front().x0.size();
    const double nu = opt.nu > 0.0 ? opt.nu : 1.0 / static_cast<double>(nx);
    require(opt.C > 0.0 && nu > 0.0 && opt.tol > 0.0, ErrorKind::PreconditionViolated, "fit_svm: C, nu must be > 0");

    std::vector<Vector> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = data.points[i];
        require(p.label == 1 || p.label == -1, ErrorKind::PreconditionViolated, "fit_svm: labels must be ±1");
        require(p.x0.size() == nx, ErrorKind::DimensionMismatch, "fit_svm: point dimension");
        x[i] = p.x0;
        y[i] = p.label;
    }
    if (data.count(1) == 0 || data.count(-1) == 0) fail(ErrorKind::SingleClassInput, "fit_svm: only one label present");

    const double C = opt.C, tau = 1e-12;
    KernelCache cache(x, nu, opt.cache_mb * 1024 * 1024 / (8 * n + 64));
    Vector alpha(n, 0.0), G(n, -1.0);  // G = Qα − e, Q_ij = y_i y_j κ(x_i, x_j)
    const std::size_t max_iter = opt.max_iter ? opt.max_iter : std::max<std::size_t>(10'000'000, 100 * n);
    auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < C : alpha[t] > 0.0; };
    auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < C; };

    SvmSafeSet out;
    out.nu = nu;
    out.C = C;
    std::size_t iter = 0;
    for (;; ++iter) {
        if (iter >= max_iter) fail(ErrorKind::NoConvergence, "fit_svm: iteration cap reached");
        double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (in_up(t) && -y[t] * G[t] > gmax) {
                gmax = -y[t] * G[t];
                i = t;
            }
        if (i == n) break;
        const Vector& Ki = cache.row(i);
        std::size_t j = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double v = -y[t] * G[t];
            gmin = std::min(gmin, v);
            const double b = gmax - v;
            if (b > 0.0) {
                double a = 2.0 - 2.0 * Ki[t];
                if (a <= 0.0) a = tau;
                if (-b * b / a < best) {
                    best = -b * b / a;
                    j = t;
                }
            }
        }
        out.kkt_violation = gmax - gmin;
        if (gmax - gmin < opt.tol || j == n) break;

        const double Kij = Ki[j];
        const Vector Ki_copy = Ki;  // the next row() call may evict it
        const Vector& Kj = cache.row(j);
        const double old_i = alpha[i], old_j = alpha[j];
        double quad = 2.0 - 2.0 * Kij;
        if (quad <= 0.0) quad = tau;
        double& ai = alpha[i];
        double& aj = alpha[j];
        if (y[i] != y[j]) {
            const double delta = (-G[i] - G[j]) / quad, diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) { aj = 0.0; ai = diff; }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > C) { ai = C; aj = C - diff; }
            } else if (aj > C) {
                aj = C;
                ai = C + diff;
            }
        } else {
            const double delta = (G[i] - G[j]) / quad, sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) { ai = C; aj = sum - C; }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > C) {
                if (aj > C) { aj = C; ai = sum - C; }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        const double di = ai - old_i, dj = aj - old_j;
        for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * (y[i] * Ki_copy[t] * di + y[j] * Kj[t] * dj);
    }
    out.iterations = iter;

    // ρ from the free multipliers, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * G[t];
        if (alpha[t] >= C) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
    out.bias = -rho;
    for (std::size_t t = 0; t < n; ++t)
        if (alpha[t] > 0.0) {
            out.support_vectors.push_back(x[t]);
            out.coef.push_back(alpha[t] * y[t]);
        }
    return out;
}

double svm_decision(const SvmSafeSet& s, std::span<const double> x) {
    double v = s.bias;
    for (std::size_t i = 0; i < s.support_vectors.size(); ++i) {
        require(s.support_vectors[i].size() == x.size(), ErrorKind::DimensionMismatch, "svm_decision: dimension");
        v += s.coef[i] * rbf(s.support_vectors[i], x, s.nu);
    }
    return v;
}

int svm_classify(const SvmSafeSet& s, std::span<const double> x) { return svm_decision(s, x) >= 0.0 ? 1 : -1; }

// ---------------------------------------------------------------------------

double metric_m_dir(const LabeledInitialSet& T_dnn, const LabeledInitialSet& T_exp) {
    require(T_dnn.points.size() == T_exp.points.size(), ErrorKind::PreconditionViolated,
            "m_dir: sets differ in size");
    for (std::size_t i = 0; i < T_dnn.points.size(); ++i)
        require(T_dnn.points[i].x0 == T_exp.points[i].x0, ErrorKind::PreconditionViolated,
                "m_dir: initial states differ");
    const std::size_t ref = T_exp.count(1);
    if (ref == 0) fail(ErrorKind::EmptyPositiveReference, "m_dir: reference set has no valid trajectory");
    return static_cast<double>(T_dnn.count(1)) / static_cast<double>(ref);
}

double metric_m_vol(const SafeSet& safe, const LabeledInitialSet& T_dnn, const LabeledInitialSet& T_exp) {
    require(T_dnn.points.size() == T_exp.points.size(), ErrorKind::PreconditionViolated,
            "m_vol: sets differ in size");
    std::size_t ref = 0, hit = 0;
    for (std::size_t i = 0; i < T_exp.points.size(); ++i) {
        require(T_dnn.points[i].x0 == T_exp.points[i].x0, ErrorKind::PreconditionViolated,
                "m_vol: initial states differ");
        if (T_exp.points[i].label != 1) continue;
        ++ref;
        if (safe(T_dnn.points[i].x0)) ++hit;
    }
    if (ref == 0) fail(ErrorKind::EmptyDenominator, "m_vol: reference set has no valid trajectory");
    return static_cast<double>(hit) / static_cast<double>(ref);
}

SafeCounts count_in_safe_set(const SafeSet& safe, const LabeledInitialSet& V) {
    SafeCounts c;
    for (const auto& p : V.points)
        if (safe(p.x0)) {
            ++c.inside;
            if (p.label == 1) ++c.valid;
        }
    return c;
}

double metric_m_fp(const SafeSet& safe, const LabeledInitialSet& V) {
    const SafeCounts c = count_in_safe_set(safe, V);
    if (c.inside == 0) fail(ErrorKind::EmptyDenominator, "m_fp: no validation point inside the safe set");
    return static_cast<double>(c.inside - c.valid) / static_cast<double>(c.inside);
}

double empirical_risk(std::size_t n_plus, std::size_t n_s) {
    require(n_s >= 1 && n_plus <= n_s, ErrorKind::PreconditionViolated, "empirical_risk: need 0 <= n_plus <= n_s, n_s >= 1");
    return static_cast<double>(n_plus) / static_cast<double>(n_s);
}

double hoeffding(std::size_t n_s, double delta) {
    require(n_s >= 1 && delta > 0.0 && delta < 1.0, ErrorKind::PreconditionViolated,
            "hoeffding: need n_s >= 1 and 0 < delta < 1");
    return 1.0 - 2.0 * std::exp(-2.0 * static_cast<double>(n_s) * delta * delta);
}

}  // namespace empc
