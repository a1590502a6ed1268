#include "empc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "empc/error.hpp"

namespace empc {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, ErrorKind::DimensionMismatch, "ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows, std::size_t cols) {
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r].size() == cols, ErrorKind::DimensionMismatch, "from_rows: ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Vector Matrix::row_vector(std::size_t r) const {
    auto s = row(r);
    return {s.begin(), s.end()};
}

Vector Matrix::col_vector(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    require(r0 + nr <= rows_ && c0 + nc <= cols_, ErrorKind::DimensionMismatch, "block out of range");
    Matrix b(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
    return b;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& m) {
    require(r0 + m.rows() <= rows_ && c0 + m.cols() <= cols_, ErrorKind::DimensionMismatch,
            "set_block out of range");
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) (*this)(r0 + r, c0 + c) = m(r, c);
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
    Matrix m(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto src = row(idx[i]);
        std::copy(src.begin(), src.end(), m.row(i).begin());
    }
    return m;
}

void Matrix::append_row(std::span<const double> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    require(r.size() == cols_, ErrorKind::DimensionMismatch, "append_row width");
    data_.insert(data_.end(), r.begin(), r.end());
    ++rows_;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    require(rows_ == o.rows_ && cols_ == o.cols_, ErrorKind::DimensionMismatch, "matrix +");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    require(rows_ == o.rows_ && cols_ == o.cols_, ErrorKind::DimensionMismatch, "matrix -");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), ErrorKind::DimensionMismatch, "matrix product");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
    require(a.cols() == x.size(), ErrorKind::DimensionMismatch, "matrix-vector product");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Vector add(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::DimensionMismatch, "vector add");
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

Vector sub(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::DimensionMismatch, "vector sub");
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

Vector scale(std::span<const double> a, double s) {
    Vector r(a.begin(), a.end());
    for (double& v : r) v *= s;
    return r;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::DimensionMismatch, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double norm_inf(const Matrix& a) {
    double m = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double v : a.row(r)) s += std::abs(v);
        m = std::max(m, s);
    }
    return m;
}

double max_abs(const Matrix& a) { return norm_inf(std::span<const double>(a.data())); }

Matrix transpose_times(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), ErrorKind::DimensionMismatch, "transpose_times");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
    return c;
}

Vector transpose_times(const Matrix& a, std::span<const double> x) {
    require(a.rows() == x.size(), ErrorKind::DimensionMismatch, "transpose_times vector");
    Vector y(a.cols(), 0.0);
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i) y[i] += a(k, i) * x[k];
    return y;
}

Matrix outer(std::span<const double> a, std::span<const double> b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

bool is_symmetric(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol) return false;
    return true;
}

// ---------------------------------------------------------------------------

Cholesky::Cholesky(const Matrix& a) : l_(a.rows(), a.cols()) {
    require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "cholesky: matrix not square");
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
        if (!(d > 1e-12)) fail(ErrorKind::NotPositiveDefinite, "cholesky pivot " + std::to_string(d));
        const double ljj = std::sqrt(d);
        l_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
            l_(i, j) = s / ljj;
        }
    }
}

Vector Cholesky::solve(std::span<const double> b) const {
    const std::size_t n = l_.rows();
    require(b.size() == n, ErrorKind::DimensionMismatch, "cholesky solve rhs");
    Vector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l_(i, k) * y[k];
        y[i] /= l_(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) y[i] -= l_(k, i) * y[k];
        y[i] /= l_(i, i);
    }
    return y;
}

Matrix Cholesky::solve(const Matrix& b) const {
    Matrix x(b.rows(), b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        Vector col = solve(b.col_vector(c));
        for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = col[r];
    }
    return x;
}

Vector cholesky_solve(const Matrix& a, std::span<const double> b) {
    require(is_symmetric(a, 1e-10), ErrorKind::PreconditionViolated, "cholesky_solve: matrix not symmetric");
    return Cholesky(a).solve(b);
}

Vector least_squares(const Matrix& a, std::span<const double> b) {
    const std::size_t m = a.rows(), n = a.cols();
    require(b.size() == m, ErrorKind::DimensionMismatch, "least_squares rhs");
    require(m >= n, ErrorKind::RankDeficient, "least_squares: fewer rows than columns");
    Matrix r = a;
    Vector qtb(b.begin(), b.end());

    double max_col = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += r(i, c) * r(i, c);
        max_col = std::max(max_col, std::sqrt(s));
    }
    if (max_col == 0.0 && n > 0) fail(ErrorKind::RankDeficient, "least_squares: zero matrix");

    Vector v(m);
    for (std::size_t k = 0; k < n; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k; i < m; ++i) alpha += r(i, k) * r(i, k);
        alpha = std::sqrt(alpha);
        if (alpha <= 1e-10 * max_col) fail(ErrorKind::RankDeficient, "least_squares: column " + std::to_string(k));
        if (r(k, k) > 0) alpha = -alpha;
        for (std::size_t i = k; i < m; ++i) v[i] = r(i, k);
        v[k] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < m; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        for (std::size_t c = k; c < n; ++c) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += v[i] * r(i, c);
            s = 2.0 * s / vnorm2;
            for (std::size_t i = k; i < m; ++i) r(i, c) -= s * v[i];
        }
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i] * qtb[i];
        s = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < m; ++i) qtb[i] -= s * v[i];
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = qtb[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= r(i, c) * x[c];
        x[i] = s / r(i, i);
    }
    return x;
}

namespace {

struct Lu {
    Matrix lu;
    std::vector<std::size_t> perm;
    int sign = 1;
};

Lu lu_factor(const Matrix& a) {
    require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "lu: matrix not square");
    const std::size_t n = a.rows();
    Lu f{a, std::vector<std::size_t>(n), 1};
    std::iota(f.perm.begin(), f.perm.end(), 0);
    const double scale = std::max(max_abs(a), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(f.lu(i, k)) > std::abs(f.lu(p, k))) p = i;
        if (std::abs(f.lu(p, k)) <= 1e-14 * scale) fail(ErrorKind::NonInvertible, "lu: singular matrix");
        if (p != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(f.lu(p, c), f.lu(k, c));
            std::swap(f.perm[p], f.perm[k]);
            f.sign = -f.sign;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = f.lu(i, k) / f.lu(k, k);
            f.lu(i, k) = m;
            for (std::size_t c = k + 1; c < n; ++c) f.lu(i, c) -= m * f.lu(k, c);
        }
    }
    return f;
}

Vector lu_apply(const Lu& f, std::span<const double> b) {
    const std::size_t n = f.lu.rows();
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < i; ++k) x[i] -= f.lu(i, k) * x[k];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) x[i] -= f.lu(i, k) * x[k];
        x[i] /= f.lu(i, i);
    }
    return x;
}

}  // namespace

Vector lu_solve(const Matrix& a, std::span<const double> b) {
    require(b.size() == a.rows(), ErrorKind::DimensionMismatch, "lu_solve rhs");
    return lu_apply(lu_factor(a), b);
}

Matrix inverse(const Matrix& a) {
    const Lu f = lu_factor(a);
    const std::size_t n = a.rows();
    Matrix inv(n, n);
    Vector e(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        std::fill(e.begin(), e.end(), 0.0);
        e[c] = 1.0;
        Vector col = lu_apply(f, e);
        for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
    }
    return inv;
}

double determinant(const Matrix& a) {
    require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "determinant: not square");
    try {
        const Lu f = lu_factor(a);
        double d = f.sign;
        for (std::size_t i = 0; i < a.rows(); ++i) d *= f.lu(i, i);
        return d;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NonInvertible) return 0.0;
        throw;
    }
}

SymEig sym_eig(const Matrix& a) {
    require(is_symmetric(a, 1e-10), ErrorKind::PreconditionViolated, "sym_eig: matrix not symmetric");
    const std::size_t n = a.rows();
    Matrix m = a;
    Matrix v = Matrix::identity(n);
    const double scale = std::max(max_abs(a), 1.0);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += m(i, j) * m(i, j);
        return std::sqrt(s);
    };

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    for (; sweep < kMaxSweeps && off_norm() > 1e-12 * scale; ++sweep) {
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m(k, p), mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m(p, k), mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    if (off_norm() > 1e-12 * scale) fail(ErrorKind::NoConvergence, "sym_eig: Jacobi sweep cap reached");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return m(i, i) > m(j, j); });
    SymEig out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = m(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
    Matrix p = q;
    const Matrix at = a.transpose();
    const Matrix bt = b.transpose();
    for (int it = 0; it < 100000; ++it) {
        const Matrix ptb = p * b;
        const Matrix s = r + bt * ptb;
        const Matrix gain = Cholesky(s).solve(transpose_times(b, p * a));  // (R + BᵀPB)⁻¹BᵀPA
        Matrix next = q + at * p * a - at * ptb * gain;
        for (std::size_t i = 0; i < next.rows(); ++i)
            for (std::size_t j = i + 1; j < next.cols(); ++j) {
                const double avg = 0.5 * (next(i, j) + next(j, i));
                next(i, j) = next(j, i) = avg;
            }
        const double diff = max_abs(next - p);
        p = std::move(next);
        if (diff <= 1e-12 * std::max(1.0, max_abs(p))) return p;
    }
    fail(ErrorKind::NoConvergence, "solve_dare: Riccati iteration did not converge");
}

}  // namespace empc
