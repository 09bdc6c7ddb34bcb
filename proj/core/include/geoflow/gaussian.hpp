#pragma once

#include <cstddef>
#include <vector>

#include "geoflow/matrix.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

/// A multivariate Gaussian with a cached Cholesky factor of its covariance.
struct GaussianSpec {
  std::vector<double> mean;
  Matrix cov;
  Matrix chol;  // lower-triangular, chol * chol^T == cov

  /// Validates symmetry (1e-12), factors the covariance, and checks the
  /// factor reproduces it within 1e-10 (Frobenius).
  static GaussianSpec make(std::vector<double> mean, Matrix cov);

  std::size_t dim() const { return mean.size(); }
};

/// n draws, one per row: mean + chol * xi with xi standard normal.
Matrix sample_gaussian(const GaussianSpec& spec, std::size_t n, SeededRng& rng);

}  // namespace geoflow
