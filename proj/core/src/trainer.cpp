#include "geoflow/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "geoflow/threads.hpp"

namespace geoflow {

void TrainConfig::validate() const {
  if (n < 1 || m < 1) throw std::invalid_argument("train config: n and m must be >= 1");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0) || !(lr_velocity > 0.0) || !(lr_scale > 0.0))
    throw std::invalid_argument("train config: learning rates must be positive");
  if (!(rms_decay > 0.0 && rms_decay < 1.0))
    throw std::invalid_argument("train config: rms_decay must lie in (0, 1)");
  if (!(rms_eps > 0.0)) throw std::invalid_argument("train config: rms_eps must be positive");
  if (critic_steps_per_actor < 1)
    throw std::invalid_argument("train config: critic_steps_per_actor must be >= 1");
  if (!(fd_step > 0.0 && fd_step < 0.1))
    throw std::invalid_argument("train config: fd_step must lie in (0, 0.1)");
}

RmspropState RmspropState::zeros_like(const MlpSpec& spec) {
  RmspropState state;
  const std::size_t layers = spec.num_layers();
  state.w_acc.reserve(layers);
  state.b_acc.reserve(layers);
  for (std::size_t j = 0; j < layers; ++j) {
    state.w_acc.emplace_back(spec.layer_sizes[j + 1], spec.layer_sizes[j]);
    state.b_acc.emplace_back(spec.layer_sizes[j + 1], 0.0);
  }
  return state;
}

namespace {

void rmsprop_elem(double& p, double& s, double g, double lr, double decay, double eps) {
  s = decay * s + (1.0 - decay) * g * g;
  p -= lr * g / (std::sqrt(s) + eps);
}

}  // namespace

void rmsprop_update(MlpParams& params, const GradBundle& grads, RmspropState& state,
                    const RmspropHyper& hyper) {
  if (params.weights.size() != grads.d_weights.size() ||
      params.weights.size() != state.w_acc.size())
    throw std::invalid_argument("rmsprop: layer counts differ");
  for (std::size_t j = 0; j < params.weights.size(); ++j) {
    Matrix& w = params.weights[j];
    Matrix& s = state.w_acc[j];
    const Matrix& g = grads.d_weights[j];
    if (w.rows() != g.rows() || w.cols() != g.cols())
      throw std::invalid_argument("rmsprop: weight gradient shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i)
      rmsprop_elem(w.data()[i], s.data()[i], g.data()[i], hyper.lr, hyper.decay, hyper.eps);
    auto& b = params.biases[j];
    auto& sb = state.b_acc[j];
    const auto& gb = grads.d_biases[j];
    if (b.size() != gb.size()) throw std::invalid_argument("rmsprop: bias gradient mismatch");
    for (std::size_t i = 0; i < b.size(); ++i)
      rmsprop_elem(b[i], sb[i], gb[i], hyper.lr, hyper.decay, hyper.eps);
  }
  if (grads.d_scale != 0.0 || state.scale_acc != 0.0)
    rmsprop_elem(params.scale, state.scale_acc, grads.d_scale, hyper.scale_lr, hyper.decay,
                 hyper.eps);
}

std::vector<double> time_grid(std::size_t m) {
  std::vector<double> ts(m);
  for (std::size_t k = 0; k < m; ++k)
    ts[k] = static_cast<double>(k + 1) / static_cast<double>(m);
  return ts;
}

std::vector<double> sample_times(const TrainConfig& cfg, SeededRng& time_rng) {
  if (cfg.time_mode == TimeMode::grid) return time_grid(cfg.m);
  std::vector<double> ts(cfg.m);
  for (double& t : ts) t = time_rng.next_double();
  return ts;
}

CriticStepResult critic_step(GeodesicNet& g, CriticNet& c, const Matrix& batch_z,
                             const Matrix& batch_y, RmspropState& opt, const TrainConfig& cfg) {
  const std::size_t nz = batch_z.rows();
  const std::size_t ny = batch_y.rows();
  if (nz == 0 || ny == 0) throw std::invalid_argument("critic_step: empty batch");

  const Matrix pushed = g_eval(g, batch_z, 1.0);
  // One forward over both sample sets so a single power-iteration step and
  // one normalization constant apply to both means.
  Matrix joint(nz + ny, pushed.cols());
  for (std::size_t i = 0; i < nz; ++i)
    std::copy(pushed.row_ptr(i), pushed.row_ptr(i) + pushed.cols(), joint.row_ptr(i));
  for (std::size_t i = 0; i < ny; ++i)
    std::copy(batch_y.row_ptr(i), batch_y.row_ptr(i) + batch_y.cols(), joint.row_ptr(nz + i));

  ForwardTape tape;
  const Matrix out = mlp_forward(c.spec, c.params, joint, RunMode::train, &tape);

  double mean_pushed = 0.0, mean_target = 0.0;
  for (std::size_t i = 0; i < nz; ++i) mean_pushed += out(i, 0);
  for (std::size_t i = 0; i < ny; ++i) mean_target += out(nz + i, 0);
  mean_pushed /= static_cast<double>(nz);
  mean_target /= static_cast<double>(ny);

  // Ascend the gap: descend its negation.
  Matrix upstream(nz + ny, 1);
  for (std::size_t i = 0; i < nz; ++i) upstream(i, 0) = -1.0 / static_cast<double>(nz);
  for (std::size_t i = 0; i < ny; ++i) upstream(nz + i, 0) = 1.0 / static_cast<double>(ny);

  const GradBundle grads = mlp_backward(c.spec, c.params, tape, upstream);
  rmsprop_update(c.params, grads, opt,
                 {cfg.lr_critic, cfg.rms_decay, cfg.rms_eps, cfg.lr_scale});
  return {mean_pushed - mean_target};
}

ActorStepResult actor_step(GeodesicNet& g, CriticNet& c, const LagrangianSpec& lag,
                           const Matrix& batch_z, std::span<const double> times,
                           RmspropState& opt, const TrainConfig& cfg) {
  const std::size_t n = batch_z.rows();
  if (n == 0) throw std::invalid_argument("actor_step: empty batch");
  if (times.empty()) throw std::invalid_argument("actor_step: no time samples");

  GradBundle grads = make_zero_grads(g.spec);
  const double m = static_cast<double>(times.size());
  const double inv_mn = 1.0 / (m * static_cast<double>(n));
  const bool needs_position = lag.kind != LagrangianSpec::Kind::quadratic;

  ActorStepResult result;
  for (const double t : times) {
    GeodesicDtEval dt_eval = g_dt_traced(g, batch_z, t);
    GeodesicEval pos_eval;
    if (needs_position) pos_eval = g_eval_traced(g, batch_z, t);
    // The quadratic cost ignores the position argument; reuse the batch to
    // keep shapes aligned without an extra forward pass.
    const Matrix& position = needs_position ? pos_eval.value : batch_z;

    const LagrangianEval leval = lagrangian_eval(lag, position, dt_eval.velocity, t);
    double mean_cost = 0.0;
    for (double v : leval.cost) mean_cost += v;
    result.cost_term += mean_cost / static_cast<double>(n) / m;

    g_dt_backward_accum(g, dt_eval, leval.d_v * inv_mn, grads);
    if (needs_position)
      grads_axpy(grads, g_backward(g, pos_eval, leval.d_x * inv_mn), 1.0);
  }

  // Terminal critic term; the critic runs frozen (eval mode) so its
  // parameters, including power vectors, stay untouched.
  GeodesicEval end_eval = g_eval_traced(g, batch_z, 1.0);
  ForwardTape critic_tape;
  const Matrix scores =
      mlp_forward(c.spec, c.params, end_eval.value, RunMode::eval, &critic_tape);
  double mean_score = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_score += scores(i, 0);
  result.critic_term = mean_score / static_cast<double>(n);

  Matrix upstream(n, 1, 1.0 / static_cast<double>(n));
  const GradBundle critic_grads = mlp_backward(c.spec, c.params, critic_tape, upstream);
  grads_axpy(grads, g_backward(g, end_eval, critic_grads.d_input), 1.0);

  rmsprop_update(g.params, grads, opt,
                 {cfg.lr_actor, cfg.rms_decay, cfg.rms_eps, cfg.lr_actor});
  return result;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  // Strict mode keeps metrics byte-reproducible across runs.
  if (threads::strict()) return 0.0;
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count();
}

}  // namespace

Phase1Result train_geodesic(const TrainConfig& cfg, const DistributionSpec& rho_a,
                            const DistributionSpec& rho_b, const LagrangianSpec& lag,
                            const NetShape& shape, const MetricsObserver& observer) {
  cfg.validate();
  const std::size_t d = rho_a.dim();
  if (rho_b.dim() != d)
    throw std::invalid_argument("train_geodesic: source and target dimensions differ");

  SeededRng root(cfg.seed);
  SeededRng actor_rng = root.split(stream::kActorInit);
  SeededRng critic_rng = root.split(stream::kCriticInit);
  SeededRng data_rng = root.split(stream::kPhase1Data);
  SeededRng time_rng = root.split(stream::kPhase1Time);

  Phase1Result result;
  result.geodesic =
      make_geodesic_net(d, shape.hidden_width, shape.hidden_layers, actor_rng, cfg.fd_step);
  result.critic = make_critic_net(d, shape.hidden_width, shape.hidden_layers, critic_rng);

  RmspropState actor_state = RmspropState::zeros_like(result.geodesic.spec);
  RmspropState critic_state = RmspropState::zeros_like(result.critic.spec);

  result.metrics.reserve(cfg.iters_phase1);
  for (std::size_t iter = 1; iter <= cfg.iters_phase1; ++iter) {
    const auto start = std::chrono::steady_clock::now();
    double gap = 0.0;
    for (std::size_t s = 0; s < cfg.critic_steps_per_actor; ++s) {
      const Matrix z = sample(rho_a, cfg.n, data_rng);
      const Matrix y = sample(rho_b, cfg.n, data_rng);
      gap = critic_step(result.geodesic, result.critic, z, y, critic_state, cfg).gap;
    }
    const Matrix z = sample(rho_a, cfg.n, data_rng);
    const std::vector<double> times = sample_times(cfg, time_rng);
    const ActorStepResult actor =
        actor_step(result.geodesic, result.critic, lag, z, times, actor_state, cfg);

    MetricsRecord record;
    record.iteration = iter;
    record.cost_estimate = actor.cost_term;
    record.critic_gap = gap;
    record.scale_lambda = result.critic.params.scale;
    record.wall_ms = elapsed_ms(start);
    result.metrics.push_back(record);
    if (observer) observer(record);

    if (!std::isfinite(actor.cost_term) || !std::isfinite(gap) ||
        !std::isfinite(result.critic.params.scale)) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

Phase2Result train_velocity(const TrainConfig& cfg, GeodesicNet& g_star, VelocityNet& vn,
                            const DistributionSpec& rho_a, std::size_t iteration_offset,
                            const MetricsObserver& observer) {
  cfg.validate();
  if (vn.dim != g_star.dim)
    throw std::invalid_argument("train_velocity: net dimensions differ");

  SeededRng root(cfg.seed);
  SeededRng data_rng = root.split(stream::kPhase2Data);
  SeededRng time_rng = root.split(stream::kPhase2Time);

  RmspropState state = RmspropState::zeros_like(vn.spec);
  Phase2Result result;
  result.metrics.reserve(cfg.iters_phase2);

  Matrix fixed_z;
  std::vector<double> fixed_times;
  if (!cfg.fresh_samples_phase2) {
    fixed_z = sample(rho_a, cfg.n, data_rng);
    fixed_times = sample_times(cfg, time_rng);
  }

  const double inv_mn = 1.0 / (static_cast<double>(cfg.m) * static_cast<double>(cfg.n));
  for (std::size_t iter = 1; iter <= cfg.iters_phase2; ++iter) {
    const auto start = std::chrono::steady_clock::now();
    const Matrix z = cfg.fresh_samples_phase2 ? sample(rho_a, cfg.n, data_rng) : fixed_z;
    const std::vector<double> times =
        cfg.fresh_samples_phase2 ? sample_times(cfg, time_rng) : fixed_times;

    GradBundle grads = make_zero_grads(vn.spec);
    double mse = 0.0;
    for (const double t : times) {
      const Matrix x = g_eval(g_star, z, t);
      const Matrix target = g_dt(g_star, z, t);
      ForwardTape tape;
      const Matrix pred =
          mlp_forward(vn.spec, vn.params, concat_time(x, t), RunMode::eval, &tape);
      Matrix residual = pred - target;
      for (std::size_t i = 0; i < residual.size(); ++i)
        mse += residual.data()[i] * residual.data()[i] * inv_mn;
      residual *= 2.0 * inv_mn;
      grads_axpy(grads, mlp_backward(vn.spec, vn.params, tape, residual), 1.0);
    }
    rmsprop_update(vn.params, grads, state,
                   {cfg.lr_velocity, cfg.rms_decay, cfg.rms_eps, cfg.lr_velocity});

    MetricsRecord record;
    record.iteration = iteration_offset + iter;
    record.phase2_mse = mse;
    record.wall_ms = elapsed_ms(start);
    result.metrics.push_back(record);
    if (observer) observer(record);

    if (!std::isfinite(mse)) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

}  // namespace geoflow
