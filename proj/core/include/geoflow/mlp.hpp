#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "geoflow/matrix.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

/// Fully connected network: affine layers with Leaky ReLU between them,
/// nothing after the last layer. Optionally each weight matrix is divided
/// by its power-iteration spectral-norm estimate, and the output is
/// multiplied by a learnable scalar.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // N_1 .. N_L
  double lrelu_slope = 0.2;
  bool spectral_norm = false;
  bool learnable_scale = false;

  void validate() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
};

struct MlpParams {
  std::vector<Matrix> weights;                    // W_j is out x in
  std::vector<std::vector<double>> biases;        // b_j
  std::vector<std::vector<double>> power_vecs;    // unit u_j, present iff spectral_norm
  double scale = 1.0;                             // meaningful iff learnable_scale
};

/// Gradients mirroring MlpParams, plus the gradient with respect to the
/// batch input.
struct GradBundle {
  std::vector<Matrix> d_weights;
  std::vector<std::vector<double>> d_biases;
  double d_scale = 0.0;
  Matrix d_input;
};

/// Cached activations from one forward pass; consumed by mlp_backward and
/// mlp_input_jvp. sigma_hat holds the per-layer spectral-norm estimate
/// actually used (1 when normalization is off or was skipped).
struct ForwardTape {
  Matrix input;
  std::vector<Matrix> pre_acts;
  std::vector<double> sigma_hat;
  std::vector<double> inv_sigma;
  bool sn_skipped = false;  // some layer had sigma_hat == 0
};

enum class RunMode { train, eval };

/// Glorot-uniform weights, zero biases, random unit power vectors, scale 1.
MlpParams mlp_init(const MlpSpec& spec, SeededRng& rng);

/// Batched forward pass (one sample per row). In train mode each
/// spectrally normalized layer advances its power vector by one step; in
/// eval mode the stored vectors are frozen.
Matrix mlp_forward(const MlpSpec& spec, MlpParams& params, const Matrix& x, RunMode mode,
                   ForwardTape* tape = nullptr);

/// Exact reverse-mode gradients of <upstream, y> for the forward pass that
/// produced `tape`. The spectral-norm constant is treated as a constant.
GradBundle mlp_backward(const MlpSpec& spec, const MlpParams& params, const ForwardTape& tape,
                        const Matrix& upstream);

/// Forward-mode directional derivative through the linearization recorded
/// in `tape`: returns J_x(net) * tangent for each row.
Matrix mlp_input_jvp(const MlpSpec& spec, const MlpParams& params, const ForwardTape& tape,
                     const Matrix& tangent);

/// One power-iteration round: u' = normalize(W^T W u), sigma = |W u'|.
/// Returns sigma = 0 with u unchanged when W^T W u vanishes (zero matrix).
std::pair<double, std::vector<double>> spectral_power_step(const Matrix& w,
                                                           std::span<const double> u);

std::size_t param_count(const MlpSpec& spec);

/// FNV-1a over the raw bit patterns of all trainable parameters and power
/// vectors; used to assert which optimizer steps touch which network.
std::uint64_t params_hash(const MlpParams& params);

}  // namespace geoflow
