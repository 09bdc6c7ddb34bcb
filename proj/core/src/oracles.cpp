#include "geoflow/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "geoflow/rng.hpp"

namespace geoflow {

AssignmentResult assignment_min_cost(const Matrix& cost) {
  if (cost.rows() != cost.cols() || cost.rows() == 0)
    throw std::invalid_argument("assignment: nonempty square cost matrix required");
  if (!cost.all_finite())
    throw std::invalid_argument("assignment: cost entries must be finite");

  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials u, v and column matches p, 1-indexed with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::size_t j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentResult result;
  result.permutation.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.permutation[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) result.total_cost += cost(i, result.permutation[i]);
  return result;
}

namespace {

constexpr std::uint64_t kSubsampleSeed = 0x5ab5a3b1e7ULL;

Matrix subsample_rows(const Matrix& m, std::size_t n) {
  SeededRng rng(kSubsampleSeed);
  std::vector<std::size_t> idx(m.rows());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.next_u64() % (idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  Matrix out(n, m.cols());
  for (std::size_t i = 0; i < n; ++i)
    std::copy(m.row_ptr(idx[i]), m.row_ptr(idx[i]) + m.cols(), out.row_ptr(i));
  return out;
}

double row_dist2(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  const double* ra = a.row_ptr(i);
  const double* rb = b.row_ptr(j);
  double s = 0.0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double d = ra[k] - rb[k];
    s += d * d;
  }
  return s;
}

}  // namespace

double empirical_wasserstein(const Matrix& a_in, const Matrix& b_in, int p) {
  if (a_in.rows() == 0 || b_in.rows() == 0)
    throw std::invalid_argument("empirical_wasserstein: empty sample set");
  if (a_in.cols() != b_in.cols())
    throw std::invalid_argument("empirical_wasserstein: point dimensions differ");
  if (p != 1 && p != 2) throw std::invalid_argument("empirical_wasserstein: p must be 1 or 2");

  const std::size_t n = std::min(a_in.rows(), b_in.rows());
  const Matrix a = a_in.rows() == n ? a_in : subsample_rows(a_in, n);
  const Matrix b = b_in.rows() == n ? b_in : subsample_rows(b_in, n);

  Matrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d2 = row_dist2(a, i, b, j);
      cost(i, j) = p == 2 ? d2 : std::sqrt(d2);
    }
  const AssignmentResult assignment = assignment_min_cost(cost);
  const double mean = assignment.total_cost / static_cast<double>(n);
  return p == 2 ? std::sqrt(mean) : mean;
}

double bures_w2_squared(const GaussianSpec& a, const GaussianSpec& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("bures: dimension mismatch");
  double mean_term = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.mean[i] - b.mean[i];
    mean_term += d * d;
  }
  const Matrix root_a = sym_sqrt(a.cov);
  const Matrix cross = sym_sqrt(matmul(matmul(root_a, b.cov), root_a));
  double trace = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    trace += a.cov(i, i) + b.cov(i, i) - 2.0 * cross(i, i);
  return mean_term + trace;
}

Matrix gaussian_ot_matrix(const GaussianSpec& a, const GaussianSpec& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("gaussian_ot: dimension mismatch");
  const Matrix root_a = sym_sqrt(a.cov);
  const Matrix inv_root_a = sym_inv_sqrt(a.cov);
  const Matrix middle = sym_sqrt(matmul(matmul(root_a, b.cov), root_a));
  return matmul(matmul(inv_root_a, middle), inv_root_a);
}

Matrix gaussian_ot_map(const GaussianSpec& a, const GaussianSpec& b, const Matrix& x) {
  if (x.cols() != a.dim()) throw std::invalid_argument("gaussian_ot_map: batch dimension mismatch");
  const Matrix a_map = gaussian_ot_matrix(a, b);
  Matrix centered = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* row = centered.row_ptr(i);
    for (std::size_t j = 0; j < x.cols(); ++j) row[j] -= a.mean[j];
  }
  Matrix out = matmul(centered, transpose(a_map));
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] += b.mean[j];
  }
  return out;
}

McCannResult mccann_interpolant(const GaussianSpec& a, const GaussianSpec& b, const Matrix& x,
                                double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("mccann_interpolant: time must lie in [0, 1]");
  McCannResult result;
  const Matrix mapped = gaussian_ot_map(a, b, x);
  result.velocity = mapped - x;
  result.position = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    result.position.data()[i] += t * result.velocity.data()[i];
  return result;
}

Matrix gaussian_velocity_at(const GaussianSpec& a, const GaussianSpec& b, const Matrix& x_t,
                            double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("gaussian_velocity_at: time must lie in [0, 1]");
  const std::size_t d = a.dim();
  if (x_t.cols() != d)
    throw std::invalid_argument("gaussian_velocity_at: batch dimension mismatch");
  const Matrix a_map = gaussian_ot_matrix(a, b);
  // Interpolation position x = M_t z + t (m_b - A m_a) with
  // M_t = (1-t) I + t A; invert for the source point z, then evaluate
  // v = (A - I) z + (m_b - A m_a).
  Matrix m_t = a_map * t;
  for (std::size_t i = 0; i < d; ++i) m_t(i, i) += 1.0 - t;
  std::vector<double> shift(d, 0.0);  // m_b - A m_a
  for (std::size_t i = 0; i < d; ++i) {
    double s = b.mean[i];
    for (std::size_t j = 0; j < d; ++j) s -= a_map(i, j) * a.mean[j];
    shift[i] = s;
  }
  Matrix out(x_t.rows(), d);
  std::vector<double> rhs(d), z(d);
  for (std::size_t r = 0; r < x_t.rows(); ++r) {
    for (std::size_t i = 0; i < d; ++i) rhs[i] = x_t(r, i) - t * shift[i];
    z = solve_spd(m_t, rhs);
    for (std::size_t i = 0; i < d; ++i) {
      double v = shift[i] - z[i];
      for (std::size_t j = 0; j < d; ++j) v += a_map(i, j) * z[j];
      out(r, i) = v;
    }
  }
  return out;
}

namespace {

struct HarmonicCoeffs {
  double alpha, beta, dalpha, dbeta;
};

HarmonicCoeffs harmonic_coeffs(double omega, double t) {
  const double s = std::sin(omega);
  HarmonicCoeffs c;
  c.alpha = (std::sin(omega * (1.0 - t)) + std::sin(omega * t)) / s;
  c.beta = std::sin(omega * t) / s;
  c.dalpha = omega * (-std::cos(omega * (1.0 - t)) + std::cos(omega * t)) / s;
  c.dbeta = omega * std::cos(omega * t) / s;
  return c;
}

}  // namespace

PathPoint harmonic_trajectory(const HarmonicOracle& o, std::span<const double, 2> x, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("harmonic_trajectory: time must lie in [0, 1]");
  o.spec.validate();
  const double omegas[2] = {o.spec.omega1, o.spec.omega2};
  PathPoint p;
  for (int i = 0; i < 2; ++i) {
    const HarmonicCoeffs c = harmonic_coeffs(omegas[i], t);
    const double dm = o.mean_b[i] - o.mean_a[i];
    p.position[i] = c.alpha * x[i] + c.beta * dm;
    p.velocity[i] = c.dalpha * x[i] + c.dbeta * dm;
  }
  return p;
}

Matrix harmonic_positions(const HarmonicOracle& o, const Matrix& x, double t) {
  if (x.cols() != 2) throw std::invalid_argument("harmonic_positions: 2-d states required");
  Matrix out(x.rows(), 2);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const PathPoint p = harmonic_trajectory(o, std::span<const double, 2>(x.row_ptr(r), 2), t);
    out(r, 0) = p.position[0];
    out(r, 1) = p.position[1];
  }
  return out;
}

Matrix harmonic_velocity_at(const HarmonicOracle& o, const Matrix& x_t, double t) {
  if (x_t.cols() != 2) throw std::invalid_argument("harmonic_velocity_at: 2-d states required");
  o.spec.validate();
  const double omegas[2] = {o.spec.omega1, o.spec.omega2};
  Matrix out(x_t.rows(), 2);
  for (std::size_t r = 0; r < x_t.rows(); ++r) {
    for (int i = 0; i < 2; ++i) {
      const HarmonicCoeffs c = harmonic_coeffs(omegas[i], t);
      const double dm = o.mean_b[i] - o.mean_a[i];
      // alpha stays >= 1 for omega in (0, pi), so the flow is invertible.
      const double x0 = (x_t(r, i) - c.beta * dm) / c.alpha;
      out(r, i) = c.dalpha * x0 + c.dbeta * dm;
    }
  }
  return out;
}

}  // namespace geoflow
