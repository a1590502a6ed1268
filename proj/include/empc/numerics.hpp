#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace empc {

using Vector = std::vector<double>;

/// Dense row-major matrix. All problems handled here are small, so no
/// expression templates or sparse storage.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);
    static Matrix from_rows(const std::vector<Vector>& rows, std::size_t cols);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    Vector row_vector(std::size_t r) const;
    Vector col_vector(std::size_t c) const;

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    Matrix transpose() const;
    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    void set_block(std::size_t r0, std::size_t c0, const Matrix& m);
    /// Rows listed in `idx`, in that order.
    Matrix select_rows(std::span<const std::size_t> idx) const;
    void append_row(std::span<const double> r);

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);

// Vector helpers.
Vector add(std::span<const double> a, std::span<const double> b);
Vector sub(std::span<const double> a, std::span<const double> b);
Vector scale(std::span<const double> a, double s);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
double norm_inf(const Matrix& a);  ///< max absolute row sum
double max_abs(const Matrix& a);
Matrix transpose_times(const Matrix& a, const Matrix& b);  ///< aᵀ·b
Vector transpose_times(const Matrix& a, std::span<const double> x);  ///< aᵀ·x
Matrix outer(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);
bool is_symmetric(const Matrix& a, double tol);

/// Lower-triangular Cholesky factor. Throws NotPositiveDefinite when a pivot
/// falls to 1e-12 or below.
class Cholesky {
public:
    explicit Cholesky(const Matrix& a);
    Vector solve(std::span<const double> b) const;
    Matrix solve(const Matrix& b) const;
    const Matrix& factor() const noexcept { return l_; }

private:
    Matrix l_;
};

Vector cholesky_solve(const Matrix& a, std::span<const double> b);

/// Householder QR least squares, min ||Ax - b||₂ for m ≥ n. Throws
/// RankDeficient when a diagonal of R drops below 1e-10 relative to the
/// largest column norm.
Vector least_squares(const Matrix& a, std::span<const double> b);

/// Square system solve by LU with partial pivoting. Throws NonInvertible.
Vector lu_solve(const Matrix& a, std::span<const double> b);
Matrix inverse(const Matrix& a);
double determinant(const Matrix& a);

struct SymEig {
    Vector values;   ///< descending
    Matrix vectors;  ///< column i pairs with values[i]
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
SymEig sym_eig(const Matrix& a);

/// Stabilizing solution of the discrete algebraic Riccati equation by
/// fixed-point iteration of the Riccati recursion.
Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);

}  // namespace empc
