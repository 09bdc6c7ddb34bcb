#include "geoflow/mlp.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace geoflow {

namespace {

constexpr double kSigmaFloor = 1e-100;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> matvec(const Matrix& w, std::span<const double> x) {
  std::vector<double> y(w.rows(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* row = w.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<double> matvec_t(const Matrix& w, std::span<const double> x) {
  std::vector<double> y(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* row = w.row_ptr(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < w.cols(); ++j) y[j] += row[j] * xi;
  }
  return y;
}

Matrix lrelu(const Matrix& z, double slope) {
  Matrix a = z;
  double* d = a.data();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (d[i] < 0.0) d[i] *= slope;
  return a;
}

void lrelu_inplace(Matrix& z, double slope) {
  double* d = z.data();
  for (std::size_t i = 0; i < z.size(); ++i)
    if (d[i] < 0.0) d[i] *= slope;
}

// Multiplies grad elementwise by the activation derivative at pre_act.
void apply_lrelu_mask(Matrix& grad, const Matrix& pre_act, double slope) {
  double* g = grad.data();
  const double* z = pre_act.data();
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (z[i] < 0.0) g[i] *= slope;
}

}  // namespace

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("mlp: layer_sizes needs at least input and output");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw std::invalid_argument("mlp: zero layer size");
  if (!(lrelu_slope > 0.0 && lrelu_slope < 1.0))
    throw std::invalid_argument("mlp: lrelu_slope must lie in (0, 1)");
  if (learnable_scale && !spectral_norm)
    throw std::invalid_argument("mlp: learnable_scale requires spectral_norm");
}

MlpParams mlp_init(const MlpSpec& spec, SeededRng& rng) {
  spec.validate();
  MlpParams params;
  const std::size_t layers = spec.num_layers();
  params.weights.reserve(layers);
  params.biases.reserve(layers);
  for (std::size_t j = 0; j < layers; ++j) {
    const std::size_t in = spec.layer_sizes[j];
    const std::size_t out = spec.layer_sizes[j + 1];
    Matrix w(out, in);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < w.size(); ++i)
      w.data()[i] = (2.0 * rng.next_double() - 1.0) * bound;
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(out, 0.0);
  }
  if (spec.spectral_norm) {
    params.power_vecs.reserve(layers);
    for (std::size_t j = 0; j < layers; ++j) {
      std::vector<double> u(spec.layer_sizes[j]);
      rng.fill_gaussian(u);
      const double n = norm2(u);
      for (double& x : u) x /= (n > 0.0 ? n : 1.0);
      params.power_vecs.push_back(std::move(u));
    }
  }
  params.scale = 1.0;
  return params;
}

std::pair<double, std::vector<double>> spectral_power_step(const Matrix& w,
                                                           std::span<const double> u) {
  if (w.cols() != u.size()) throw std::invalid_argument("spectral_power_step: shape mismatch");
  const std::vector<double> wu = matvec(w, u);
  std::vector<double> wtwu = matvec_t(w, wu);
  const double n = norm2(wtwu);
  if (n < kSigmaFloor) return {0.0, std::vector<double>(u.begin(), u.end())};
  for (double& x : wtwu) x /= n;
  const double sigma = norm2(matvec(w, wtwu));
  return {sigma, std::move(wtwu)};
}

Matrix mlp_forward(const MlpSpec& spec, MlpParams& params, const Matrix& x, RunMode mode,
                   ForwardTape* tape) {
  spec.validate();
  if (x.cols() != spec.input_dim())
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  const std::size_t layers = spec.num_layers();
  if (params.weights.size() != layers)
    throw std::invalid_argument("mlp_forward: params do not match spec");

  if (tape != nullptr) {
    tape->input = x;
    tape->pre_acts.assign(layers, Matrix());
    tape->sigma_hat.assign(layers, 1.0);
    tape->inv_sigma.assign(layers, 1.0);
    tape->sn_skipped = false;
  }

  Matrix cur = x;
  for (std::size_t j = 0; j < layers; ++j) {
    double inv_sigma = 1.0;
    double sigma = 1.0;
    if (spec.spectral_norm) {
      if (mode == RunMode::train) {
        auto [s, u] = spectral_power_step(params.weights[j], params.power_vecs[j]);
        sigma = s;
        if (s > 0.0) params.power_vecs[j] = std::move(u);
      } else {
        sigma = norm2(matvec(params.weights[j], params.power_vecs[j]));
      }
      if (sigma > kSigmaFloor) {
        inv_sigma = 1.0 / sigma;
      } else {
        // Degenerate layer: pass through unscaled, flag for the caller.
        sigma = 0.0;
        inv_sigma = 1.0;
        if (tape != nullptr) tape->sn_skipped = true;
      }
    }

    Matrix z = matmul(cur, transpose(params.weights[j]));
    const std::vector<double>& b = params.biases[j];
    for (std::size_t r = 0; r < z.rows(); ++r) {
      double* row = z.row_ptr(r);
      for (std::size_t c = 0; c < z.cols(); ++c) row[c] = row[c] * inv_sigma + b[c];
    }
    if (tape != nullptr) {
      tape->sigma_hat[j] = sigma;
      tape->inv_sigma[j] = inv_sigma;
      tape->pre_acts[j] = std::move(z);
      cur = (j + 1 < layers) ? lrelu(tape->pre_acts[j], spec.lrelu_slope)
                             : tape->pre_acts[j];
    } else {
      if (j + 1 < layers) lrelu_inplace(z, spec.lrelu_slope);
      cur = std::move(z);
    }
  }
  if (spec.learnable_scale) cur *= params.scale;
  return cur;
}

GradBundle mlp_backward(const MlpSpec& spec, const MlpParams& params, const ForwardTape& tape,
                        const Matrix& upstream) {
  const std::size_t layers = spec.num_layers();
  if (tape.pre_acts.size() != layers)
    throw std::invalid_argument("mlp_backward: tape does not match spec");
  if (upstream.rows() != tape.input.rows() || upstream.cols() != spec.output_dim())
    throw std::invalid_argument("mlp_backward: upstream shape mismatch");

  GradBundle grads;
  grads.d_weights.resize(layers);
  grads.d_biases.resize(layers);

  Matrix cur;  // gradient w.r.t. pre-activation of the current layer
  if (spec.learnable_scale) {
    double ds = 0.0;
    const double* u = upstream.data();
    const double* z = tape.pre_acts.back().data();
    for (std::size_t i = 0; i < upstream.size(); ++i) ds += u[i] * z[i];
    grads.d_scale = ds;
    cur = upstream * params.scale;
  } else {
    cur = upstream;
  }

  for (std::size_t j = layers; j-- > 0;) {
    std::vector<double> db(spec.layer_sizes[j + 1], 0.0);
    for (std::size_t r = 0; r < cur.rows(); ++r) {
      const double* row = cur.row_ptr(r);
      for (std::size_t c = 0; c < cur.cols(); ++c) db[c] += row[c];
    }
    grads.d_biases[j] = std::move(db);

    const Matrix input_j =
        (j == 0) ? tape.input : lrelu(tape.pre_acts[j - 1], spec.lrelu_slope);
    Matrix dw = matmul(transpose(cur), input_j);
    dw *= tape.inv_sigma[j];
    grads.d_weights[j] = std::move(dw);

    Matrix down = matmul(cur, params.weights[j]);
    down *= tape.inv_sigma[j];
    if (j > 0) {
      apply_lrelu_mask(down, tape.pre_acts[j - 1], spec.lrelu_slope);
      cur = std::move(down);
    } else {
      grads.d_input = std::move(down);
    }
  }
  return grads;
}

Matrix mlp_input_jvp(const MlpSpec& spec, const MlpParams& params, const ForwardTape& tape,
                     const Matrix& tangent) {
  const std::size_t layers = spec.num_layers();
  if (tape.pre_acts.size() != layers)
    throw std::invalid_argument("mlp_input_jvp: tape does not match spec");
  if (tangent.rows() != tape.input.rows() || tangent.cols() != spec.input_dim())
    throw std::invalid_argument("mlp_input_jvp: tangent shape mismatch");

  Matrix tz = tangent;
  for (std::size_t j = 0; j < layers; ++j) {
    tz = matmul(tz, transpose(params.weights[j]));
    tz *= tape.inv_sigma[j];
    if (j + 1 < layers) apply_lrelu_mask(tz, tape.pre_acts[j], spec.lrelu_slope);
  }
  if (spec.learnable_scale) tz *= params.scale;
  return tz;
}

std::size_t param_count(const MlpSpec& spec) {
  std::size_t n = 0;
  for (std::size_t j = 0; j + 1 < spec.layer_sizes.size(); ++j)
    n += (spec.layer_sizes[j] + 1) * spec.layer_sizes[j + 1];
  if (spec.learnable_scale) n += 1;
  return n;
}

std::uint64_t params_hash(const MlpParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &data[i], sizeof(bits));
      for (int b = 0; b < 64; b += 8) {
        h ^= (bits >> b) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  };
  for (const Matrix& w : params.weights) feed(w.data(), w.size());
  for (const auto& b : params.biases) feed(b.data(), b.size());
  for (const auto& u : params.power_vecs) feed(u.data(), u.size());
  feed(&params.scale, 1);
  return h;
}

}  // namespace geoflow
