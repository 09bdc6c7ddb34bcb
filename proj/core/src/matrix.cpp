#include "geoflow/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "geoflow/threads.hpp"

namespace geoflow {

namespace {

[[noreturn]] void dim_error(const std::string& what) {
  throw std::invalid_argument("matrix: " + what);
}

// c(i,:) += a(i,k) * b(k,:) for all k; the inner loop is a contiguous
// fused multiply-add, so it vectorizes without reassociating sums.
void gemm_rows(const double* a, const double* b, double* c, std::size_t row_begin,
               std::size_t row_end, std::size_t k, std::size_t p) {
  for (std::size_t i = row_begin; i < row_end; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += av * bk[j];
    }
  }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) dim_error("ragged initializer");
    std::copy(row.begin(), row.end(), m.row_ptr(i));
    ++i;
  }
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) dim_error("shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) dim_error("shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) dim_error("matmul inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  const std::size_t p = b.cols();
  const int nt = threads::count();
  if (nt > 1 && n >= 2 && n * k * p >= 1u << 16) {
#ifdef GEOFLOW_HAVE_OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
      gemm_rows(a.data(), b.data(), c.data(), static_cast<std::size_t>(i),
                static_cast<std::size_t>(i) + 1, k, p);
#else
    gemm_rows(a.data(), b.data(), c.data(), 0, n, k, p);
#endif
  } else {
    gemm_rows(a.data(), b.data(), c.data(), 0, n, k, p);
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
  return std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double s = 0.0;
  const double* d = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) s = std::max(s, std::abs(d[i]));
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) dim_error("shape mismatch in max_abs_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a.data()[i] - b.data()[i]));
  return s;
}

EigenSym jacobi_eigen_sym(const Matrix& m, double symmetry_tol) {
  if (m.rows() != m.cols()) dim_error("jacobi_eigen_sym requires a square matrix");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > symmetry_tol)
        throw std::invalid_argument("jacobi_eigen_sym: matrix is not symmetric");

  Matrix a = m;
  Matrix v = Matrix::identity(n);
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= 1e-14 * std::max(1.0, frobenius_norm(a))) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double apj = a(p, j);
          const double aqj = a(q, j);
          a(p, j) = c * apj - s * aqj;
          a(q, j) = s * apj + c * aqj;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  EigenSym result;
  result.vectors = std::move(v);
  result.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.values[i] = a(i, i);
  return result;
}

namespace {

Matrix apply_spectral(const Matrix& m, double (*f)(double), double min_eigenvalue) {
  EigenSym eig = jacobi_eigen_sym(m);
  const std::size_t n = m.rows();
  for (double& lambda : eig.values) {
    if (lambda < min_eigenvalue)
      throw std::domain_error("matrix: eigenvalue " + std::to_string(lambda) +
                              " below admissible range");
    if (lambda < 0.0) lambda = 0.0;
  }
  Matrix scaled = eig.vectors;  // columns scaled by f(lambda)
  for (std::size_t j = 0; j < n; ++j) {
    const double fj = f(eig.values[j]);
    for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= fj;
  }
  Matrix out = matmul(scaled, transpose(eig.vectors));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = avg;
      out(j, i) = avg;
    }
  return out;
}

}  // namespace

Matrix sym_sqrt(const Matrix& m) {
  return apply_spectral(m, [](double x) { return std::sqrt(x); }, -1e-8);
}

Matrix sym_inv_sqrt(const Matrix& m) {
  EigenSym eig = jacobi_eigen_sym(m);
  for (double lambda : eig.values)
    if (lambda <= 1e-12)
      throw std::domain_error("sym_inv_sqrt: matrix is singular or indefinite");
  return apply_spectral(m, [](double x) { return 1.0 / std::sqrt(x); }, 1e-12);
}

Matrix cholesky_lower(const Matrix& m) {
  if (m.rows() != m.cols()) dim_error("cholesky_lower requires a square matrix");
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = m(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      if (i == j) {
        if (sum <= 0.0)
          throw std::domain_error("cholesky_lower: matrix is not positive definite");
        l(i, j) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

std::vector<double> solve_spd(const Matrix& m, std::span<const double> rhs) {
  if (m.rows() != rhs.size()) dim_error("solve_spd dimension mismatch");
  const Matrix l = cholesky_lower(m);
  const std::size_t n = m.rows();
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = rhs[i];
    for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * y[k];
    y[i] = sum / l(i, i);
  }
  for (std::size_t idx = n; idx-- > 0;) {
    double sum = y[idx];
    for (std::size_t k = idx + 1; k < n; ++k) sum -= l(k, idx) * x[k];
    x[idx] = sum / l(idx, idx);
  }
  return x;
}

}  // namespace geoflow
