#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "geoflow/matrix.hpp"
#include "geoflow/mlp.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

/// The trajectory map G(t; z) = z + t * F(z, t) with F a network taking
/// (z, t) concatenated and returning a displacement field.
struct GeodesicNet {
  MlpSpec spec;
  MlpParams params;
  std::size_t dim = 0;
  double fd_step = 1e-3;
};

/// Lipschitz test function: spectrally normalized layers with a learnable
/// output scale absorbing the multiplier.
struct CriticNet {
  MlpSpec spec;
  MlpParams params;
};

/// Eulerian field v(x, t), input (x, t) concatenated.
struct VelocityNet {
  MlpSpec spec;
  MlpParams params;
  std::size_t dim = 0;
};

GeodesicNet make_geodesic_net(std::size_t dim, std::size_t hidden_width,
                              std::size_t hidden_layers, SeededRng& rng,
                              double fd_step = 1e-3);
CriticNet make_critic_net(std::size_t dim, std::size_t hidden_width, std::size_t hidden_layers,
                          SeededRng& rng);
VelocityNet make_velocity_net(std::size_t dim, std::size_t hidden_width,
                              std::size_t hidden_layers, SeededRng& rng);

/// Harmonic potential V(x) = (w1^2 x1^2 + w2^2 x2^2) / 2 for 2-d states.
struct HarmonicSpec {
  double omega1 = 1.2;
  double omega2 = 0.1;
  void validate() const;  // 0 < omega < pi
};

/// Instantaneous transport cost L(x, v, t).
struct LagrangianSpec {
  enum class Kind { quadratic, kinetic_minus_potential };
  Kind kind = Kind::quadratic;
  HarmonicSpec potential;  // used iff kinetic_minus_potential

  static LagrangianSpec quadratic();
  static LagrangianSpec harmonic(HarmonicSpec spec);
};

struct LagrangianEval {
  std::vector<double> cost;  // per sample
  Matrix d_v;
  Matrix d_x;
};

/// Quadratic: cost |v|^2, d_v = 2v, d_x = 0.
/// Kinetic-minus-potential: cost (|v|^2 - w1^2 x1^2 - w2^2 x2^2)/2,
/// d_v = v, d_x = (-w1^2 x1, -w2^2 x2).
LagrangianEval lagrangian_eval(const LagrangianSpec& spec, const Matrix& x, const Matrix& v,
                               double t);

/// [x | t] concatenation used by the time-dependent networks.
Matrix concat_time(const Matrix& x, double t);
Matrix concat_time(const Matrix& x, std::span<const double> t_per_row);

/// G(t; z). Exactly the identity at t = 0.
Matrix g_eval(GeodesicNet& g, const Matrix& z, double t);

struct GeodesicEval {
  Matrix value;      // G(t; z)
  ForwardTape tape;  // of the F forward
  double t = 0.0;
};
GeodesicEval g_eval_traced(GeodesicNet& g, const Matrix& z, double t);

/// Gradients of <upstream, G(t; z)> with respect to the F parameters.
GradBundle g_backward(const GeodesicNet& g, const GeodesicEval& eval, const Matrix& upstream);

/// Second-order finite-difference stencil for d/dt inside [0, 1]; central
/// away from the boundary, one-sided of matching order at it.
struct TimeStencil {
  std::vector<double> ts;
  std::vector<double> coeffs;
};
TimeStencil dt_stencil(double t, double h);

/// dG/dt via the stencil. The skip term cancels analytically, so this is
/// the weighted sum of t_k * F(z, t_k) over stencil nodes.
Matrix g_dt(GeodesicNet& g, const Matrix& z, double t);

struct GeodesicDtEval {
  Matrix velocity;
  TimeStencil stencil;
  std::vector<ForwardTape> tapes;  // one per stencil node
};
GeodesicDtEval g_dt_traced(GeodesicNet& g, const Matrix& z, double t);

/// Accumulates gradients of <upstream, dG/dt> into `into`.
void g_dt_backward_accum(const GeodesicNet& g, const GeodesicDtEval& eval,
                         const Matrix& upstream, GradBundle& into);

/// Exact derivative F(z,t) + t * dF/dt via tangent propagation; verification
/// path, not used by training.
Matrix g_dt_exact(GeodesicNet& g, const Matrix& z, double t);

/// Scalar critic outputs, one per row. Train mode advances the power
/// iteration; eval mode freezes it.
std::vector<double> critic_eval(CriticNet& c, const Matrix& x, RunMode mode);

/// Plain forward pass of the velocity net at (x, t).
Matrix velocity_eval(VelocityNet& vn, const Matrix& x, double t);
Matrix velocity_eval(VelocityNet& vn, const Matrix& x, std::span<const double> t_per_row);

/// Zero-initialized gradient accumulator matching `spec`.
GradBundle make_zero_grads(const MlpSpec& spec);

/// into += a * g for all parameter gradients (d_input is not accumulated).
void grads_axpy(GradBundle& into, const GradBundle& g, double a);

}  // namespace geoflow
