#include "geoflow/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace geoflow {

GaussianSpec GaussianSpec::make(std::vector<double> mean, Matrix cov) {
  if (mean.empty()) throw std::invalid_argument("gaussian: empty mean");
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw std::invalid_argument("gaussian: covariance shape does not match mean");
  if (!cov.all_finite()) throw std::invalid_argument("gaussian: covariance not finite");
  for (std::size_t i = 0; i < cov.rows(); ++i)
    for (std::size_t j = i + 1; j < cov.cols(); ++j)
      if (std::abs(cov(i, j) - cov(j, i)) > 1e-12)
        throw std::invalid_argument("gaussian: covariance is not symmetric");

  GaussianSpec spec;
  spec.mean = std::move(mean);
  spec.chol = cholesky_lower(cov);
  const Matrix rebuilt = matmul(spec.chol, transpose(spec.chol));
  if (frobenius_norm(rebuilt - cov) > 1e-10)
    throw std::runtime_error("gaussian: Cholesky factor does not reproduce covariance");
  spec.cov = std::move(cov);
  return spec;
}

Matrix sample_gaussian(const GaussianSpec& spec, std::size_t n, SeededRng& rng) {
  if (n == 0) throw std::invalid_argument("sample_gaussian: n must be >= 1");
  const std::size_t d = spec.dim();
  Matrix xi(n, d);
  rng.fill_gaussian({xi.data(), xi.size()});
  // x_i = mean + chol * xi_i, batched as xi * chol^T.
  Matrix out = matmul(xi, transpose(spec.chol));
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) row[j] += spec.mean[j];
  }
  return out;
}

}  // namespace geoflow
