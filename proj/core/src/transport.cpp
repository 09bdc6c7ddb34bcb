#include "geoflow/transport.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace geoflow {

namespace {

MlpSpec dense_spec(std::size_t in, std::size_t out, std::size_t hidden_width,
                   std::size_t hidden_layers, bool spectral, bool scale) {
  MlpSpec spec;
  spec.layer_sizes.push_back(in);
  for (std::size_t i = 0; i < hidden_layers; ++i) spec.layer_sizes.push_back(hidden_width);
  spec.layer_sizes.push_back(out);
  spec.spectral_norm = spectral;
  spec.learnable_scale = scale;
  spec.validate();
  return spec;
}

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("geodesic: time must lie in [0, 1]");
}

}  // namespace

GeodesicNet make_geodesic_net(std::size_t dim, std::size_t hidden_width,
                              std::size_t hidden_layers, SeededRng& rng, double fd_step) {
  if (!(fd_step > 0.0 && fd_step < 0.1))
    throw std::invalid_argument("geodesic: fd_step must lie in (0, 0.1)");
  GeodesicNet g;
  g.spec = dense_spec(dim + 1, dim, hidden_width, hidden_layers, false, false);
  g.params = mlp_init(g.spec, rng);
  g.dim = dim;
  g.fd_step = fd_step;
  return g;
}

CriticNet make_critic_net(std::size_t dim, std::size_t hidden_width, std::size_t hidden_layers,
                          SeededRng& rng) {
  CriticNet c;
  c.spec = dense_spec(dim, 1, hidden_width, hidden_layers, true, true);
  c.params = mlp_init(c.spec, rng);
  return c;
}

VelocityNet make_velocity_net(std::size_t dim, std::size_t hidden_width,
                              std::size_t hidden_layers, SeededRng& rng) {
  VelocityNet v;
  v.spec = dense_spec(dim + 1, dim, hidden_width, hidden_layers, false, false);
  v.params = mlp_init(v.spec, rng);
  v.dim = dim;
  return v;
}

void HarmonicSpec::validate() const {
  if (!(omega1 > 0.0 && omega1 < std::numbers::pi) ||
      !(omega2 > 0.0 && omega2 < std::numbers::pi))
    throw std::invalid_argument("harmonic: frequencies must lie in (0, pi)");
}

LagrangianSpec LagrangianSpec::quadratic() {
  LagrangianSpec spec;
  spec.kind = Kind::quadratic;
  return spec;
}

LagrangianSpec LagrangianSpec::harmonic(HarmonicSpec h) {
  h.validate();
  LagrangianSpec spec;
  spec.kind = Kind::kinetic_minus_potential;
  spec.potential = h;
  return spec;
}

LagrangianEval lagrangian_eval(const LagrangianSpec& spec, const Matrix& x, const Matrix& v,
                               double /*t*/) {
  if (x.rows() != v.rows() || x.cols() != v.cols())
    throw std::invalid_argument("lagrangian_eval: x and v shapes differ");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  LagrangianEval out;
  out.cost.resize(n);
  out.d_v = Matrix(n, d);
  out.d_x = Matrix(n, d);

  if (spec.kind == LagrangianSpec::Kind::quadratic) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* vi = v.row_ptr(i);
      double s = 0.0;
      double* dv = out.d_v.row_ptr(i);
      for (std::size_t j = 0; j < d; ++j) {
        s += vi[j] * vi[j];
        dv[j] = 2.0 * vi[j];
      }
      out.cost[i] = s;
    }
    return out;
  }

  if (d != 2)
    throw std::invalid_argument("lagrangian_eval: harmonic potential needs 2-d states");
  const double w1sq = spec.potential.omega1 * spec.potential.omega1;
  const double w2sq = spec.potential.omega2 * spec.potential.omega2;
  for (std::size_t i = 0; i < n; ++i) {
    const double* vi = v.row_ptr(i);
    const double* xi = x.row_ptr(i);
    out.cost[i] = 0.5 * (vi[0] * vi[0] + vi[1] * vi[1] - w1sq * xi[0] * xi[0] -
                         w2sq * xi[1] * xi[1]);
    out.d_v(i, 0) = vi[0];
    out.d_v(i, 1) = vi[1];
    out.d_x(i, 0) = -w1sq * xi[0];
    out.d_x(i, 1) = -w2sq * xi[1];
  }
  return out;
}

Matrix concat_time(const Matrix& x, double t) {
  Matrix out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* row = out.row_ptr(i);
    const double* src = x.row_ptr(i);
    for (std::size_t j = 0; j < x.cols(); ++j) row[j] = src[j];
    row[x.cols()] = t;
  }
  return out;
}

Matrix concat_time(const Matrix& x, std::span<const double> t_per_row) {
  if (t_per_row.size() != x.rows())
    throw std::invalid_argument("concat_time: one time per row required");
  Matrix out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* row = out.row_ptr(i);
    const double* src = x.row_ptr(i);
    for (std::size_t j = 0; j < x.cols(); ++j) row[j] = src[j];
    row[x.cols()] = t_per_row[i];
  }
  return out;
}

namespace {

Matrix geodesic_combine(const Matrix& z, const Matrix& f, double t) {
  Matrix out = z;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += t * f.data()[i];
  return out;
}

}  // namespace

Matrix g_eval(GeodesicNet& g, const Matrix& z, double t) {
  check_time(t);
  if (z.cols() != g.dim) throw std::invalid_argument("g_eval: state dimension mismatch");
  const Matrix f = mlp_forward(g.spec, g.params, concat_time(z, t), RunMode::eval);
  return geodesic_combine(z, f, t);
}

GeodesicEval g_eval_traced(GeodesicNet& g, const Matrix& z, double t) {
  check_time(t);
  if (z.cols() != g.dim) throw std::invalid_argument("g_eval: state dimension mismatch");
  GeodesicEval eval;
  eval.t = t;
  const Matrix f =
      mlp_forward(g.spec, g.params, concat_time(z, t), RunMode::eval, &eval.tape);
  eval.value = geodesic_combine(z, f, t);
  return eval;
}

GradBundle g_backward(const GeodesicNet& g, const GeodesicEval& eval, const Matrix& upstream) {
  // dG/dF = t; the skip connection carries no parameters.
  return mlp_backward(g.spec, g.params, eval.tape, upstream * eval.t);
}

TimeStencil dt_stencil(double t, double h) {
  check_time(t);
  TimeStencil s;
  if (t < h) {
    s.ts = {t, t + h, t + 2.0 * h};
    s.coeffs = {-1.5 / h, 2.0 / h, -0.5 / h};
  } else if (t > 1.0 - h) {
    s.ts = {t, t - h, t - 2.0 * h};
    s.coeffs = {1.5 / h, -2.0 / h, 0.5 / h};
  } else {
    s.ts = {t + h, t - h};
    s.coeffs = {0.5 / h, -0.5 / h};
  }
  return s;
}

Matrix g_dt(GeodesicNet& g, const Matrix& z, double t) {
  if (z.cols() != g.dim) throw std::invalid_argument("g_dt: state dimension mismatch");
  const TimeStencil s = dt_stencil(t, g.fd_step);
  Matrix vel(z.rows(), z.cols());
  for (std::size_t k = 0; k < s.ts.size(); ++k) {
    const Matrix f = mlp_forward(g.spec, g.params, concat_time(z, s.ts[k]), RunMode::eval);
    const double w = s.coeffs[k] * s.ts[k];
    for (std::size_t i = 0; i < vel.size(); ++i) vel.data()[i] += w * f.data()[i];
  }
  return vel;
}

GeodesicDtEval g_dt_traced(GeodesicNet& g, const Matrix& z, double t) {
  if (z.cols() != g.dim) throw std::invalid_argument("g_dt: state dimension mismatch");
  GeodesicDtEval eval;
  eval.stencil = dt_stencil(t, g.fd_step);
  eval.tapes.resize(eval.stencil.ts.size());
  Matrix vel(z.rows(), z.cols());
  for (std::size_t k = 0; k < eval.stencil.ts.size(); ++k) {
    const Matrix f = mlp_forward(g.spec, g.params, concat_time(z, eval.stencil.ts[k]),
                                 RunMode::eval, &eval.tapes[k]);
    const double w = eval.stencil.coeffs[k] * eval.stencil.ts[k];
    for (std::size_t i = 0; i < vel.size(); ++i) vel.data()[i] += w * f.data()[i];
  }
  eval.velocity = std::move(vel);
  return eval;
}

void g_dt_backward_accum(const GeodesicNet& g, const GeodesicDtEval& eval,
                         const Matrix& upstream, GradBundle& into) {
  for (std::size_t k = 0; k < eval.stencil.ts.size(); ++k) {
    const double w = eval.stencil.coeffs[k] * eval.stencil.ts[k];
    const GradBundle grads = mlp_backward(g.spec, g.params, eval.tapes[k], upstream * w);
    grads_axpy(into, grads, 1.0);
  }
}

Matrix g_dt_exact(GeodesicNet& g, const Matrix& z, double t) {
  check_time(t);
  if (z.cols() != g.dim) throw std::invalid_argument("g_dt_exact: state dimension mismatch");
  ForwardTape tape;
  const Matrix f = mlp_forward(g.spec, g.params, concat_time(z, t), RunMode::eval, &tape);
  Matrix tangent(z.rows(), g.dim + 1);
  for (std::size_t i = 0; i < z.rows(); ++i) tangent(i, g.dim) = 1.0;
  const Matrix df_dt = mlp_input_jvp(g.spec, g.params, tape, tangent);
  Matrix out = f;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += t * df_dt.data()[i];
  return out;
}

std::vector<double> critic_eval(CriticNet& c, const Matrix& x, RunMode mode) {
  const Matrix y = mlp_forward(c.spec, c.params, x, mode);
  std::vector<double> out(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) out[i] = y(i, 0);
  return out;
}

Matrix velocity_eval(VelocityNet& vn, const Matrix& x, double t) {
  return mlp_forward(vn.spec, vn.params, concat_time(x, t), RunMode::eval);
}

Matrix velocity_eval(VelocityNet& vn, const Matrix& x, std::span<const double> t_per_row) {
  return mlp_forward(vn.spec, vn.params, concat_time(x, t_per_row), RunMode::eval);
}

GradBundle make_zero_grads(const MlpSpec& spec) {
  GradBundle grads;
  const std::size_t layers = spec.num_layers();
  grads.d_weights.reserve(layers);
  grads.d_biases.reserve(layers);
  for (std::size_t j = 0; j < layers; ++j) {
    grads.d_weights.emplace_back(spec.layer_sizes[j + 1], spec.layer_sizes[j]);
    grads.d_biases.emplace_back(spec.layer_sizes[j + 1], 0.0);
  }
  return grads;
}

void grads_axpy(GradBundle& into, const GradBundle& g, double a) {
  for (std::size_t j = 0; j < into.d_weights.size(); ++j) {
    Matrix& w = into.d_weights[j];
    const Matrix& src = g.d_weights[j];
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] += a * src.data()[i];
    auto& b = into.d_biases[j];
    const auto& sb = g.d_biases[j];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += a * sb[i];
  }
  into.d_scale += a * g.d_scale;
}

}  // namespace geoflow
