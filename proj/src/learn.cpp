#include "empc/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "empc/error.hpp"
#include "empc/parallel.hpp"
#include "empc/qp.hpp"

namespace empc {

void TrainConfig::validate(std::size_t nx) const {
    require(learning_rate > 0.0 && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && eps > 0.0,
            ErrorKind::PreconditionViolated, "train config: rates must be positive (betas in (0,1))");
    require(batch_size >= 1 && epochs >= 1 && L >= 1, ErrorKind::PreconditionViolated,
            "train config: batch_size, epochs and L must be >= 1");
    require(M >= nx, ErrorKind::PreconditionViolated, "train config: M must be >= n_x");
}

ReluNetwork init_network(std::size_t nx, std::size_t nu, std::size_t M, std::size_t L, std::uint64_t seed) {
    constexpr std::uint64_t kStream = 0x494e4954;  // "INIT"
    ReluNetwork n;
    std::size_t in = nx;
    for (std::size_t l = 0; l <= L; ++l) {
        const std::size_t out = l == L ? nu : M;
        auto rng = index_stream(seed, kStream, l);
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        Layer layer{Matrix(out, in), Vector(out, 0.0)};
        for (double& w : layer.W.data()) w = uniform(rng, -limit, limit);
        n.layers.push_back(std::move(layer));
        in = out;
    }
    return n;
}

Vector flatten(const ReluNetwork& n) {
    Vector p;
    for (const auto& layer : n.layers) {
        p.insert(p.end(), layer.W.data().begin(), layer.W.data().end());
        p.insert(p.end(), layer.b.begin(), layer.b.end());
    }
    return p;
}

void unflatten(ReluNetwork& n, std::span<const double> params) {
    std::size_t k = 0;
    for (auto& layer : n.layers) {
        for (double& w : layer.W.data()) {
            require(k < params.size(), ErrorKind::DimensionMismatch, "unflatten: too few parameters");
            w = params[k++];
        }
        for (double& b : layer.b) {
            require(k < params.size(), ErrorKind::DimensionMismatch, "unflatten: too few parameters");
            b = params[k++];
        }
    }
    require(k == params.size(), ErrorKind::DimensionMismatch, "unflatten: too many parameters");
}

double mse(const ReluNetwork& n, std::span<const DataPoint> points) {
    require(!points.empty(), ErrorKind::EmptySet, "mse: no points");
    double sum = 0.0;
    for (const auto& p : points) {
        const Vector y = eval_network(n, p.x);
        for (std::size_t i = 0; i < y.size(); ++i) sum += (y[i] - p.u[i]) * (y[i] - p.u[i]);
    }
    return sum / static_cast<double>(points.size());
}

double mse_gradient(const ReluNetwork& n, std::span<const DataPoint> points, Vector& grad) {
    require(!points.empty(), ErrorKind::EmptySet, "mse_gradient: no points");
    const std::size_t nl = n.layers.size();
    std::vector<std::size_t> offset(nl);
    std::size_t total = 0;
    for (std::size_t l = 0; l < nl; ++l) {
        offset[l] = total;
        total += n.layers[l].W.data().size() + n.layers[l].b.size();
    }
    grad.assign(total, 0.0);
    const double inv = 1.0 / static_cast<double>(points.size());

    std::vector<Vector> act(nl + 1);  // act[0] = x, act[l+1] = output of layer l (post-ReLU for hidden)
    double loss = 0.0;
    for (const auto& p : points) {
        act[0] = p.x;
        for (std::size_t l = 0; l < nl; ++l) {
            const Layer& layer = n.layers[l];
            Vector z = layer.W * act[l];
            for (std::size_t i = 0; i < z.size(); ++i) {
                z[i] += layer.b[i];
                if (l + 1 < nl) z[i] = std::max(0.0, z[i]);
            }
            act[l + 1] = std::move(z);
        }
        Vector delta(act[nl].size());
        for (std::size_t i = 0; i < delta.size(); ++i) {
            const double r = act[nl][i] - p.u[i];
            loss += r * r;
            delta[i] = 2.0 * r * inv;
        }
        for (std::size_t l = nl; l-- > 0;) {
            const Layer& layer = n.layers[l];
            const Vector& in = act[l];
            double* gw = grad.data() + offset[l];
            double* gb = gw + layer.W.data().size();
            for (std::size_t i = 0; i < layer.W.rows(); ++i) {
                gb[i] += delta[i];
                for (std::size_t j = 0; j < layer.W.cols(); ++j) gw[i * layer.W.cols() + j] += delta[i] * in[j];
            }
            if (l == 0) break;
            Vector back = transpose_times(layer.W, delta);
            // ReLU derivative of the previous hidden layer (active iff output > 0).
            for (std::size_t j = 0; j < back.size(); ++j)
                if (act[l][j] <= 0.0) back[j] = 0.0;
            delta = std::move(back);
        }
    }
    return loss * inv;
}

Vector finite_difference_gradient(const ReluNetwork& n, std::span<const DataPoint> points, double h) {
    Vector p = flatten(n);
    Vector g(p.size());
    ReluNetwork work = n;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double saved = p[k];
        p[k] = saved + h;
        unflatten(work, p);
        const double up = mse(work, points);
        p[k] = saved - h;
        unflatten(work, p);
        const double down = mse(work, points);
        p[k] = saved;
        g[k] = (up - down) / (2.0 * h);
    }
    return g;
}

AdamStep adam_update(std::span<const double> params, std::span<const double> grads, const AdamState& state,
                     const TrainConfig& cfg) {
    const std::size_t n = params.size();
    require(grads.size() == n, ErrorKind::DimensionMismatch, "adam_update: gradient size");
    AdamStep out{Vector(params.begin(), params.end()), state};
    if (out.state.m.empty()) out.state.m.assign(n, 0.0);
    if (out.state.v.empty()) out.state.v.assign(n, 0.0);
    require(out.state.m.size() == n && out.state.v.size() == n, ErrorKind::DimensionMismatch, "adam_update: state size");
    ++out.state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(out.state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(out.state.t));
    for (std::size_t i = 0; i < n; ++i) {
        out.state.m[i] = cfg.beta1 * out.state.m[i] + (1.0 - cfg.beta1) * grads[i];
        out.state.v[i] = cfg.beta2 * out.state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = out.state.m[i] / c1, vhat = out.state.v[i] / c2;
        out.params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    return out;
}

namespace {

struct Standardizer {
    Vector mx, sx, mu, su;
};

Standardizer standardizer(const Dataset& d, bool enabled) {
    const std::size_t nx = d.nx(), nu = d.nu();
    Standardizer s{Vector(nx, 0.0), Vector(nx, 1.0), Vector(nu, 0.0), Vector(nu, 1.0)};
    if (!enabled) return s;
    auto moments = [&](auto get, std::size_t dim, Vector& mean, Vector& sd) {
        for (const auto& p : d.points)
            for (std::size_t j = 0; j < dim; ++j) mean[j] += get(p)[j];
        for (double& m : mean) m /= static_cast<double>(d.points.size());
        Vector var(dim, 0.0);
        for (const auto& p : d.points)
            for (std::size_t j = 0; j < dim; ++j) var[j] += (get(p)[j] - mean[j]) * (get(p)[j] - mean[j]);
        for (std::size_t j = 0; j < dim; ++j) {
            sd[j] = std::sqrt(var[j] / static_cast<double>(d.points.size()));
            if (sd[j] < 1e-12) sd[j] = 1.0;
        }
    };
    moments([](const DataPoint& p) -> const Vector& { return p.x; }, nx, s.mx, s.sx);
    moments([](const DataPoint& p) -> const Vector& { return p.u; }, nu, s.mu, s.su);
    return s;
}

// Folds x̃ = (x − mx)/sx into the first layer and u = su·ũ + mu into the last.
ReluNetwork fold(ReluNetwork n, const Standardizer& s) {
    Layer& first = n.layers.front();
    for (std::size_t i = 0; i < first.W.rows(); ++i) {
        for (std::size_t j = 0; j < first.W.cols(); ++j) {
            first.W(i, j) /= s.sx[j];
            first.b[i] -= first.W(i, j) * s.mx[j];
        }
    }
    Layer& last = n.layers.back();
    for (std::size_t i = 0; i < last.W.rows(); ++i) {
        for (std::size_t j = 0; j < last.W.cols(); ++j) last.W(i, j) *= s.su[i];
        last.b[i] = last.b[i] * s.su[i] + s.mu[i];
    }
    return n;
}

}  // namespace

TrainResult train_mlp(const Dataset& data, const TrainConfig& cfg) {
    require(!data.points.empty(), ErrorKind::EmptySet, "train_mlp: empty dataset");
    const std::size_t nx = data.nx(), nu = data.nu(), n = data.points.size();
    cfg.validate(nx);
    constexpr std::uint64_t kShuffle = 0x53485546;  // "SHUF"

    const Standardizer s = standardizer(data, cfg.standardize);
    std::vector<DataPoint> scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
        scaled[i].x.resize(nx);
        scaled[i].u.resize(nu);
        for (std::size_t j = 0; j < nx; ++j) scaled[i].x[j] = (data.points[i].x[j] - s.mx[j]) / s.sx[j];
        for (std::size_t j = 0; j < nu; ++j) scaled[i].u[j] = (data.points[i].u[j] - s.mu[j]) / s.su[j];
    }

    ReluNetwork net = init_network(nx, nu, cfg.M, cfg.L, cfg.seed);
    Vector params = flatten(net);
    AdamState adam;
    TrainResult result;
    std::vector<std::size_t> order(n);
    std::vector<DataPoint> batch;
    Vector grad;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        auto rng = index_stream(cfg.seed, kShuffle, epoch);
        for (std::size_t i = n; i-- > 1;) {
            auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
            std::swap(order[i], order[std::min(j, i)]);
        }
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(scaled[order[k]]);
            unflatten(net, params);
            const double loss = mse_gradient(net, batch, grad);
            if (!std::isfinite(loss) || !all_finite(grad))
                fail(ErrorKind::NonFiniteLoss, "training diverged in epoch " + std::to_string(epoch));
            AdamStep step = adam_update(params, grad, adam, cfg);
            params = std::move(step.params);
            adam = std::move(step.state);
        }
        unflatten(net, params);
        const double epoch_mse = mse(fold(net, s), data.points);
        if (!std::isfinite(epoch_mse))
            fail(ErrorKind::NonFiniteLoss, "non-finite loss after epoch " + std::to_string(epoch));
        result.loss_history.push_back(epoch_mse);
    }
    unflatten(net, params);
    result.net = fold(net, s);
    result.final_mse = mse(result.net, data.points);
    return result;
}

std::size_t Polynomial::num_terms() const {
    std::size_t t = 1;
    for (std::size_t j = 0; j < nx; ++j) t *= degree + 1;
    return t;
}

Vector monomials(std::span<const double> x, std::size_t degree) {
    const std::size_t nx = x.size();
    std::size_t terms = 1;
    for (std::size_t j = 0; j < nx; ++j) terms *= degree + 1;
    // powers[j][e] = x_j^e
    std::vector<Vector> powers(nx, Vector(degree + 1, 1.0));
    for (std::size_t j = 0; j < nx; ++j)
        for (std::size_t e = 1; e <= degree; ++e) powers[j][e] = powers[j][e - 1] * x[j];
    Vector out(terms);
    for (std::size_t m = 0; m < terms; ++m) {
        double v = 1.0;
        std::size_t r = m;
        for (std::size_t j = 0; j < nx; ++j) {
            v *= powers[j][r % (degree + 1)];
            r /= degree + 1;
        }
        out[m] = v;
    }
    return out;
}

Polynomial fit_polynomial(const Dataset& data, std::size_t degree) {
    require(!data.points.empty(), ErrorKind::EmptySet, "fit_polynomial: empty dataset");
    Polynomial p{degree, data.nx(), data.nu(), {}};
    const std::size_t terms = p.num_terms(), n = data.points.size();
    if (n < terms) fail(ErrorKind::RankDeficient, "fit_polynomial: fewer points than coefficients");

    Matrix design(n, terms);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector row = monomials(data.points[i].x, degree);
        for (std::size_t m = 0; m < terms; ++m) design(i, m) = row[m];
    }
    // Column equilibration keeps high-degree terms from swamping the QR.
    Vector colscale(terms, 0.0);
    for (std::size_t m = 0; m < terms; ++m) {
        for (std::size_t i = 0; i < n; ++i) colscale[m] += design(i, m) * design(i, m);
        colscale[m] = std::sqrt(colscale[m]);
        if (colscale[m] == 0.0) fail(ErrorKind::RankDeficient, "fit_polynomial: zero monomial column");
        for (std::size_t i = 0; i < n; ++i) design(i, m) /= colscale[m];
    }
    p.coeffs = Matrix(p.nu, terms);
    for (std::size_t k = 0; k < p.nu; ++k) {
        Vector target(n);
        for (std::size_t i = 0; i < n; ++i) target[i] = data.points[i].u[k];
        const Vector c = least_squares(design, target);
        for (std::size_t m = 0; m < terms; ++m) p.coeffs(k, m) = c[m] / colscale[m];
    }
    return p;
}

Vector poly_eval(const Polynomial& p, std::span<const double> x) {
    require(x.size() == p.nx, ErrorKind::DimensionMismatch, "poly_eval: input dims");
    return p.coeffs * monomials(x, p.degree);
}

std::size_t memory_footprint_poly(const Polynomial& p, std::size_t alpha_bit) {
    return alpha_bit * p.nu * p.num_terms();
}

PwaRefit fit_pwa_gains(const PwaFunction& partition, const Dataset& data) {
    partition.validate();
    const std::size_t nx = partition.nx, nu = partition.nu, nr = partition.regions.size();
    require(data.points.empty() || (data.nx() == nx && data.nu() == nu), ErrorKind::DimensionMismatch,
            "fit_pwa_gains: dataset dims");
    std::vector<std::vector<std::size_t>> members(nr);
    for (std::size_t i = 0; i < data.points.size(); ++i)
        if (const auto r = locate(partition, data.points[i].x)) members[*r].push_back(i);

    PwaRefit out{partition, 0, {}};
    for (std::size_t r = 0; r < nr; ++r) {
        out.counts.push_back(members[r].size());
        if (members[r].size() < nx + 1) {
            ++out.kept_prior;
            continue;
        }
        Matrix design(members[r].size(), nx + 1);
        for (std::size_t k = 0; k < members[r].size(); ++k) {
            const Vector& x = data.points[members[r][k]].x;
            for (std::size_t j = 0; j < nx; ++j) design(k, j) = x[j];
            design(k, nx) = 1.0;
        }
        try {
            PwaRegion fitted = partition.regions[r];
            for (std::size_t o = 0; o < nu; ++o) {
                Vector target(members[r].size());
                for (std::size_t k = 0; k < members[r].size(); ++k) target[k] = data.points[members[r][k]].u[o];
                const Vector c = least_squares(design, target);
                for (std::size_t j = 0; j < nx; ++j) fitted.K(o, j) = c[j];
                fitted.g[o] = c[nx];
            }
            out.law.regions[r] = std::move(fitted);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::RankDeficient) throw;
            ++out.kept_prior;
        }
    }
    return out;
}

double pwa_objective(const PwaFunction& f, const Dataset& data) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : data.points) {
        if (!locate(f, p.x)) continue;
        const Vector u = eval_pwa(f, p.x);
        for (std::size_t i = 0; i < u.size(); ++i) sum += (u[i] - p.u[i]) * (u[i] - p.u[i]);
        ++count;
    }
    require(count > 0, ErrorKind::EmptySet, "pwa_objective: no data inside the partition");
    return sum / static_cast<double>(count);
}

std::optional<std::pair<Vector, Vector>> as_box(const Polytope& U) {
    const std::size_t d = U.dim();
    Vector lo(d, -std::numeric_limits<double>::infinity()), hi(d, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < U.num_rows(); ++i) {
        std::size_t nz = d, count = 0;
        for (std::size_t j = 0; j < d; ++j)
            if (U.C(i, j) != 0.0) nz = j, ++count;
        if (count != 1) return std::nullopt;
        const double a = U.C(i, nz);
        if (a > 0.0) hi[nz] = std::min(hi[nz], U.c[i] / a);
        else lo[nz] = std::max(lo[nz], U.c[i] / a);
    }
    return std::make_pair(lo, hi);
}

Vector project_feasible(std::span<const double> u_raw, std::span<const double> x, const LtiSystem& sys,
                        const Polytope& U, const std::optional<Polytope>& Cinv) {
    const std::size_t nu = sys.nu();
    require(u_raw.size() == nu && x.size() == sys.nx(), ErrorKind::DimensionMismatch, "project_feasible: dims");
    require(U.num_rows() == 0 || U.dim() == nu, ErrorKind::DimensionMismatch, "project_feasible: U dims");
    if (Cinv)
        require(Cinv->contains(x, 1e-9), ErrorKind::PreconditionViolated, "project_feasible: x outside C_inv");

    if (!Cinv) {
        if (const auto box = as_box(U)) {
            Vector u(u_raw.begin(), u_raw.end());
            for (std::size_t i = 0; i < nu; ++i) {
                if (box->first[i] > box->second[i]) fail(ErrorKind::ProjectionInfeasible, "empty input box");
                u[i] = std::clamp(u[i], box->first[i], box->second[i]);
            }
            return u;
        }
    }
    QpProblem p;
    p.H = Matrix::identity(nu);
    p.q = scale(u_raw, -2.0);
    p.A = U.num_rows() ? U.C : Matrix(0, nu);
    p.b = U.c;
    if (Cinv) {
        const Matrix cb = Cinv->C * sys.B;
        const Vector cax = Cinv->C * (sys.A * x);
        for (std::size_t i = 0; i < Cinv->num_rows(); ++i) {
            p.A.append_row(cb.row(i));
            p.b.push_back(Cinv->c[i] - cax[i]);
        }
    }
    const QpSolution sol = solve_qp(p);
    if (sol.status == QpStatus::Infeasible) fail(ErrorKind::ProjectionInfeasible, "no admissible input keeps x in C_inv");
    if (sol.status != QpStatus::Optimal) fail(ErrorKind::MaxIter, "projection QP did not converge");
    return sol.z;
}

}  // namespace empc
