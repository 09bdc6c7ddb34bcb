#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "geoflow/gaussian.hpp"
#include "geoflow/matrix.hpp"
#include "geoflow/transport.hpp"

namespace geoflow {

/// Exact solution of the equal-weight discrete transport problem: a
/// minimum-cost perfect matching.
struct AssignmentResult {
  std::vector<std::size_t> permutation;  // row i matched to column permutation[i]
  double total_cost = 0.0;
};

/// Hungarian algorithm with potentials, O(n^3). Requires a square matrix of
/// finite entries.
AssignmentResult assignment_min_cost(const Matrix& cost);

/// Exact empirical Wasserstein-p distance (p = 1 or 2) between two sample
/// sets, one point per row. Unequal set sizes are reduced by seeded
/// subsampling of the larger set.
double empirical_wasserstein(const Matrix& a, const Matrix& b, int p);

/// Squared 2-Wasserstein distance between Gaussians:
/// |m_a - m_b|^2 + tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2}).
double bures_w2_squared(const GaussianSpec& a, const GaussianSpec& b);

/// The linear part A of the Gaussian optimal map T(x) = m_b + A (x - m_a).
Matrix gaussian_ot_matrix(const GaussianSpec& a, const GaussianSpec& b);

/// Gaussian optimal transport map applied to a batch.
Matrix gaussian_ot_map(const GaussianSpec& a, const GaussianSpec& b, const Matrix& x);

/// Constant-speed geodesic position (1-t) x + t T(x) and its velocity
/// T(x) - x (constant along each path).
struct McCannResult {
  Matrix position;
  Matrix velocity;
};
McCannResult mccann_interpolant(const GaussianSpec& a, const GaussianSpec& b, const Matrix& x,
                                double t);

/// Eulerian velocity of the Gaussian geodesic at position x_t and time t,
/// obtained by inverting the interpolation map.
Matrix gaussian_velocity_at(const GaussianSpec& a, const GaussianSpec& b, const Matrix& x_t,
                            double t);

/// Closed-form minimizer of the kinetic-minus-harmonic-potential action
/// between translated Gaussian blobs.
struct HarmonicOracle {
  HarmonicSpec spec;
  std::array<double, 2> mean_a{};
  std::array<double, 2> mean_b{};
};

struct PathPoint {
  std::array<double, 2> position{};
  std::array<double, 2> velocity{};
};

/// Position and exact velocity at time t of the particle started at x.
PathPoint harmonic_trajectory(const HarmonicOracle& o, std::span<const double, 2> x, double t);

/// Batched positions of harmonic_trajectory.
Matrix harmonic_positions(const HarmonicOracle& o, const Matrix& x, double t);

/// Eulerian velocity of the harmonic flow at position x_t and time t.
Matrix harmonic_velocity_at(const HarmonicOracle& o, const Matrix& x_t, double t);

}  // namespace geoflow
