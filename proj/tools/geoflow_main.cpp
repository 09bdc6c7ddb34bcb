// Command-line front end: phase-1/phase-2 training, checkpoint evaluation
// against exact transport oracles, trajectory export, and oracle queries.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geoflow/checkpoint.hpp"
#include "geoflow/evaluation.hpp"
#include "geoflow/metrics_io.hpp"
#include "geoflow/oracles.hpp"
#include "geoflow/run_config.hpp"
#include "geoflow/trainer.hpp"

namespace fs = std::filesystem;
using namespace geoflow;

namespace {

int run_train(const std::string& config_path, const std::optional<std::string>& output_dir) {
  RunConfig cfg = load_config_file(config_path);
  if (output_dir.has_value()) cfg.output_dir = *output_dir;
  const DistributionSpec source = resolve_distribution(cfg.source);
  const DistributionSpec target = resolve_distribution(cfg.target);

  fs::create_directories(cfg.output_dir);
  const fs::path metrics_path = cfg.output_dir / "metrics.csv";
  fs::remove(metrics_path);

  std::vector<MetricsRecord> pending;
  const auto observer = [&](const MetricsRecord& r) {
    pending.push_back(r);
    if (pending.size() >= 500) {
      write_metrics_csv(metrics_path, pending, /*append=*/true);
      pending.clear();
    }
    if (r.iteration % 1000 == 0) {
      std::printf("iter %zu cost_estimate %.4f critic_gap %.4f lambda %.4f\n", r.iteration,
                  r.cost_estimate.value_or(0.0), r.critic_gap.value_or(0.0),
                  r.scale_lambda.value_or(0.0));
      std::fflush(stdout);
    }
  };

  Phase1Result result =
      train_geodesic(cfg.train, source, target, cfg.lagrangian, cfg.net, observer);

  // Authoritative rewrite: one atomic file containing exactly the run.
  write_metrics_csv(metrics_path, result.metrics, /*append=*/false);

  Checkpoint ck;
  ck.config = cfg;
  ck.iteration = result.metrics.empty() ? 0 : result.metrics.back().iteration;
  ck.seed = cfg.train.seed;
  ck.geodesic = std::move(result.geodesic);
  ck.critic = std::move(result.critic);
  save_checkpoint(cfg.output_dir / "checkpoint.json", ck);

  if (result.diverged) {
    std::cerr << "training diverged (non-finite loss); checkpoint and metrics written to "
              << cfg.output_dir << "\n";
    return 2;
  }
  if (!result.metrics.empty()) {
    const MetricsRecord& last = result.metrics.back();
    std::printf("phase-1 done: %zu iterations, cost_estimate %.6f, critic_gap %.6f\n",
                last.iteration, last.cost_estimate.value_or(0.0),
                last.critic_gap.value_or(0.0));
  }
  std::printf("wrote %s and %s\n", (cfg.output_dir / "checkpoint.json").c_str(),
              (cfg.output_dir / "metrics.csv").c_str());
  return 0;
}

int run_train_velocity(const std::string& checkpoint_path, std::optional<std::size_t> iters) {
  const fs::path ck_path(checkpoint_path);
  Checkpoint ck = load_checkpoint(ck_path);
  if (iters.has_value()) ck.config.train.iters_phase2 = *iters;
  const DistributionSpec source = resolve_distribution(ck.config.source);

  SeededRng init_rng = SeededRng(ck.config.train.seed).split(stream::kVelocityInit);
  VelocityNet vn = make_velocity_net(ck.geodesic.dim, ck.config.net.hidden_width,
                                     ck.config.net.hidden_layers, init_rng);

  const fs::path dir = ck_path.parent_path().empty() ? "." : ck_path.parent_path();
  const fs::path metrics_path = dir / "metrics.csv";
  std::string metrics_base;
  if (fs::exists(metrics_path)) {
    std::ifstream in(metrics_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    metrics_base = ss.str();
  }

  std::vector<MetricsRecord> pending;
  const auto observer = [&](const MetricsRecord& r) {
    pending.push_back(r);
    if (pending.size() >= 500) {
      write_metrics_csv(metrics_path, pending, /*append=*/true);
      pending.clear();
    }
    if (r.iteration % 1000 == 0) {
      std::printf("iter %zu phase2_mse %.6g\n", r.iteration, r.phase2_mse.value_or(0.0));
      std::fflush(stdout);
    }
  };

  Phase2Result result =
      train_velocity(ck.config.train, ck.geodesic, vn, source, ck.iteration, observer);

  // Authoritative rewrite: the pre-run stream plus exactly this run's rows.
  write_file_atomic(metrics_path, metrics_base);
  write_metrics_csv(metrics_path, result.metrics, /*append=*/true);

  ck.velocity = std::move(vn);
  if (!result.metrics.empty()) ck.iteration = result.metrics.back().iteration;
  save_checkpoint(ck_path, ck);

  if (result.diverged) {
    std::cerr << "phase-2 training diverged (non-finite loss)\n";
    return 2;
  }
  if (!result.metrics.empty())
    std::printf("phase-2 done: final mse %.6g\n",
                result.metrics.back().phase2_mse.value_or(0.0));
  return 0;
}

int run_eval(const std::string& checkpoint_path, std::size_t n_samples,
             std::size_t n_particles, const std::optional<std::string>& out_path,
             bool export_samples) {
  const fs::path ck_path(checkpoint_path);
  Checkpoint ck = load_checkpoint(ck_path);
  const DistributionSpec source = resolve_distribution(ck.config.source);
  const DistributionSpec target = resolve_distribution(ck.config.target);

  EvalOptions options;
  options.n_samples = n_samples;
  options.n_particles = n_particles;
  VelocityNet* vn = ck.velocity.has_value() ? &*ck.velocity : nullptr;
  const EvalReport report =
      run_evaluation(ck.config, ck.geodesic, vn, source, target, options);

  const fs::path dir = ck_path.parent_path().empty() ? "." : ck_path.parent_path();
  const fs::path eval_path = out_path.has_value() ? fs::path(*out_path) : dir / "eval.json";
  write_file_atomic(eval_path, eval_report_to_json(report));
  if (export_samples)
    write_file_atomic(dir / "eval_samples.csv", eval_samples_to_csv(report));

  std::printf("W1(pushforward, target) = %.6f\n", report.w1_pushforward_target);
  std::printf("W2(pushforward, target) = %.6f (squared %.6f)\n",
              report.w2_pushforward_target, report.w2_squared_pushforward_target);
  std::printf("W1 target sampling baseline = %.6f\n", report.w1_target_baseline);
  if (report.bures_w2_squared_value.has_value())
    std::printf("analytic W2 squared = %.6f\n", *report.bures_w2_squared_value);
  if (report.harmonic_trajectory_rmse.has_value())
    std::printf("trajectory rmse vs analytic = %.6f\n", *report.harmonic_trajectory_rmse);
  if (report.velocity_mse_vs_analytic.has_value())
    std::printf("velocity mse vs analytic = %.6f\n", *report.velocity_mse_vs_analytic);
  std::printf("wrote %s\n", eval_path.c_str());
  return 0;
}

std::vector<double> parse_times(const std::string& csv) {
  std::vector<double> times;
  std::string token;
  for (const char c : csv + ",") {
    if (c == ',') {
      if (!token.empty()) times.push_back(std::stod(token));
      token.clear();
    } else {
      token.push_back(c);
    }
  }
  if (times.empty()) throw std::invalid_argument("export: no times given");
  for (const double t : times)
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("export: times must lie in [0, 1]");
  return times;
}

int run_export(const std::string& checkpoint_path, const std::string& times_csv,
               std::size_t n, const std::optional<std::string>& out_path) {
  const fs::path ck_path(checkpoint_path);
  Checkpoint ck = load_checkpoint(ck_path);
  const DistributionSpec source = resolve_distribution(ck.config.source);
  const std::vector<double> times = parse_times(times_csv);

  SeededRng rng = SeededRng(ck.config.train.seed).split(stream::kEval).split(8);
  const Matrix z = sample(source, n, rng);
  std::vector<Matrix> positions;
  positions.reserve(times.size());
  for (const double t : times) positions.push_back(g_eval(ck.geodesic, z, t));

  const fs::path dir = ck_path.parent_path().empty() ? "." : ck_path.parent_path();
  const fs::path path = out_path.has_value() ? fs::path(*out_path) : dir / "trajectories.csv";
  write_trajectories_csv(path, times, positions);
  std::printf("wrote %zu trajectories at %zu times to %s\n", n, times.size(), path.c_str());
  return 0;
}

int run_oracle(const std::string& experiment, const std::string& times_csv) {
  const Experiment exp = experiment_from_name(experiment);
  RunConfig cfg;
  cfg.experiment = exp;
  // Reuse the preset tables through the parser.
  cfg = parse_config(std::string("{\"experiment\":\"") + experiment + "\"}");

  if (exp == Experiment::synthetic1 || exp == Experiment::synthetic3) {
    const auto a = std::get<GaussianSpec>(resolve_distribution(cfg.source).value);
    const auto b = std::get<GaussianSpec>(resolve_distribution(cfg.target).value);
    std::printf("%.6f\n", bures_w2_squared(a, b));
    return 0;
  }
  if (exp == Experiment::synthetic4) {
    const auto a = std::get<GaussianSpec>(resolve_distribution(cfg.source).value);
    const auto b = std::get<GaussianSpec>(resolve_distribution(cfg.target).value);
    HarmonicOracle oracle;
    oracle.spec = cfg.lagrangian.potential;
    oracle.mean_a = {a.mean[0], a.mean[1]};
    oracle.mean_b = {b.mean[0], b.mean[1]};
    std::printf("t,x_1,x_2,v_1,v_2\n");
    for (const double t : parse_times(times_csv)) {
      const PathPoint p = harmonic_trajectory(oracle, std::span<const double, 2>(a.mean.data(), 2), t);
      std::printf("%.6f,%.6f,%.6f,%.6f,%.6f\n", t, p.position[0], p.position[1],
                  p.velocity[0], p.velocity[1]);
    }
    return 0;
  }
  std::cerr << "no analytic oracle for experiment " << experiment << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein geodesic and velocity-field learner"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, experiment;
  std::string times_csv = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  std::optional<std::string> output_dir, out_path;
  std::optional<std::size_t> phase2_iters;
  std::size_t n_samples = 2000, n_particles = 500, export_n = 100;
  bool no_export_samples = false;

  CLI::App* train = app.add_subcommand("train", "Run phase-1 adversarial training");
  train->add_option("--config", config_path, "Run configuration JSON")->required();
  train->add_option("--output-dir", output_dir, "Override the configured output directory");

  CLI::App* train_vel =
      app.add_subcommand("train-velocity", "Run phase-2 velocity-field regression");
  train_vel->add_option("--checkpoint", checkpoint_path, "Phase-1 checkpoint")->required();
  train_vel->add_option("--iters", phase2_iters, "Override phase-2 iteration count");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint with exact OT oracles");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint to evaluate")->required();
  eval->add_option("--samples", n_samples, "Sample count for the exact OT comparison");
  eval->add_option("--particles", n_particles, "Particle count for path comparisons");
  eval->add_option("--out", out_path, "Output path for eval.json");
  eval->add_flag("--no-export-samples", no_export_samples,
                 "Skip writing eval_samples.csv");

  CLI::App* export_cmd = app.add_subcommand("export", "Export trajectories as CSV");
  export_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint to export")->required();
  export_cmd->add_option("--times", times_csv, "Comma-separated times in [0, 1]");
  export_cmd->add_option("--n", export_n, "Number of particles");
  export_cmd->add_option("--out", out_path, "Output path for trajectories.csv");

  CLI::App* oracle = app.add_subcommand("oracle", "Print analytic quantities for a preset");
  oracle->add_option("--experiment", experiment, "Preset experiment name")->required();
  oracle->add_option("--times", times_csv, "Times for trajectory oracles");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(config_path, output_dir);
    if (train_vel->parsed()) return run_train_velocity(checkpoint_path, phase2_iters);
    if (eval->parsed())
      return run_eval(checkpoint_path, n_samples, n_particles, out_path, !no_export_samples);
    if (export_cmd->parsed()) return run_export(checkpoint_path, times_csv, export_n, out_path);
    if (oracle->parsed()) return run_oracle(experiment, times_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
