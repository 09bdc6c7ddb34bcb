#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "geoflow/datasets.hpp"
#include "geoflow/mlp.hpp"
#include "geoflow/transport.hpp"

namespace geoflow {

enum class TimeMode { grid, uniform };

struct TrainConfig {
  std::size_t n = 256;  // batch size
  std::size_t m = 10;   // time samples per batch
  TimeMode time_mode = TimeMode::grid;
  double lr_actor = 5e-5;
  double lr_critic = 5e-5;
  double lr_velocity = 1e-3;
  double lr_scale = 1e-2;  // step size for the critic's output scale
  double rms_decay = 0.99;
  double rms_eps = 1e-8;
  std::size_t iters_phase1 = 20000;
  std::size_t iters_phase2 = 5000;
  std::size_t critic_steps_per_actor = 1;
  std::uint64_t seed = 0;
  double fd_step = 1e-3;
  bool fresh_samples_phase2 = true;

  void validate() const;
};

struct NetShape {
  std::size_t hidden_width = 128;
  std::size_t hidden_layers = 3;  // depth 5 counted in layer widths
};

/// Squared-gradient accumulators mirroring MlpParams; entries stay >= 0.
struct RmspropState {
  std::vector<Matrix> w_acc;
  std::vector<std::vector<double>> b_acc;
  double scale_acc = 0.0;

  static RmspropState zeros_like(const MlpSpec& spec);
};

struct RmspropHyper {
  double lr = 1e-4;
  double decay = 0.99;
  double eps = 1e-8;
  double scale_lr = 1e-4;  // separate step size for the scalar multiplier
};

/// s <- decay s + (1 - decay) g^2; p <- p - lr g / (sqrt(s) + eps).
void rmsprop_update(MlpParams& params, const GradBundle& grads, RmspropState& state,
                    const RmspropHyper& hyper);

struct MetricsRecord {
  std::size_t iteration = 0;
  std::optional<double> cost_estimate;  // Lagrangian term of the phase-1 objective
  std::optional<double> critic_gap;     // critic objective value
  std::optional<double> scale_lambda;
  std::optional<double> phase2_mse;
  double wall_ms = 0.0;
};

/// Deterministic stream ids carved from the run seed.
namespace stream {
inline constexpr std::uint64_t kActorInit = 0xA1;
inline constexpr std::uint64_t kCriticInit = 0xC1;
inline constexpr std::uint64_t kVelocityInit = 0xF1;
inline constexpr std::uint64_t kPhase1Data = 0xD1;
inline constexpr std::uint64_t kPhase1Time = 0x71;
inline constexpr std::uint64_t kPhase2Data = 0xD2;
inline constexpr std::uint64_t kPhase2Time = 0x72;
inline constexpr std::uint64_t kEval = 0xEE;
}  // namespace stream

/// The phase-1 time points: k/m for k = 1..m in grid mode, i.i.d. uniform
/// draws otherwise.
std::vector<double> time_grid(std::size_t m);
std::vector<double> sample_times(const TrainConfig& cfg, SeededRng& time_rng);

struct CriticStepResult {
  double gap = 0.0;  // mean critic(G(1;Z)) - mean critic(Y)
};

/// One ascent step on the critic objective; geodesic parameters untouched.
CriticStepResult critic_step(GeodesicNet& g, CriticNet& c, const Matrix& batch_z,
                             const Matrix& batch_y, RmspropState& opt, const TrainConfig& cfg);

struct ActorStepResult {
  double cost_term = 0.0;    // (1/mn) sum L(G, dG/dt, t)
  double critic_term = 0.0;  // (1/n) sum critic(G(1;Z))
};

/// One descent step on the actor objective; critic parameters untouched
/// (the critic is evaluated with frozen power vectors).
ActorStepResult actor_step(GeodesicNet& g, CriticNet& c, const LagrangianSpec& lag,
                           const Matrix& batch_z, std::span<const double> times,
                           RmspropState& opt, const TrainConfig& cfg);

struct Phase1Result {
  GeodesicNet geodesic;
  CriticNet critic;
  std::vector<MetricsRecord> metrics;
  bool diverged = false;
};

/// Observer invoked after every recorded iteration (progress reporting,
/// incremental metric flushes). May be empty.
using MetricsObserver = std::function<void(const MetricsRecord&)>;

/// Adversarial training of the geodesic map against the critic; alternates
/// critic_steps_per_actor critic steps with one actor step, fresh batches
/// every step. Deterministic given cfg.seed.
Phase1Result train_geodesic(const TrainConfig& cfg, const DistributionSpec& rho_a,
                            const DistributionSpec& rho_b, const LagrangianSpec& lag,
                            const NetShape& shape, const MetricsObserver& observer = {});

struct Phase2Result {
  std::vector<MetricsRecord> metrics;
  bool diverged = false;
};

/// Supervised regression of the Eulerian field onto trajectory velocities
/// of the frozen geodesic. Iteration numbers continue from
/// iteration_offset so a combined metrics stream stays strictly increasing.
Phase2Result train_velocity(const TrainConfig& cfg, GeodesicNet& g_star, VelocityNet& vn,
                            const DistributionSpec& rho_a, std::size_t iteration_offset = 0,
                            const MetricsObserver& observer = {});

}  // namespace geoflow
