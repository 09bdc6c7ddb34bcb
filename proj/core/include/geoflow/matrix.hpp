#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace geoflow {

/// Dense row-major matrix of doubles. Also used as a batch of samples
/// (one sample per row).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  std::span<double> row(std::size_t r) { return {row_ptr(r), cols_}; }
  std::span<const double> row(std::size_t r) const { return {row_ptr(r), cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// c = a * b. Deterministic for any thread count.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// m = vectors * diag(values) * vectors^T, eigenvectors in columns.
struct EigenSym {
  Matrix vectors;
  std::vector<double> values;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
EigenSym jacobi_eigen_sym(const Matrix& m, double symmetry_tol = 1e-10);

/// Symmetric square root of a symmetric PSD matrix. Eigenvalues in
/// [-1e-8, 0) are clamped to zero; anything below -1e-8 is rejected.
Matrix sym_sqrt(const Matrix& m);

/// Symmetric inverse square root; requires strictly positive eigenvalues.
Matrix sym_inv_sqrt(const Matrix& m);

/// Lower-triangular L with L*L^T = m. Throws if m is not positive definite.
Matrix cholesky_lower(const Matrix& m);

/// Solves m*x = rhs for symmetric positive-definite m via Cholesky.
std::vector<double> solve_spd(const Matrix& m, std::span<const double> rhs);

}  // namespace geoflow
