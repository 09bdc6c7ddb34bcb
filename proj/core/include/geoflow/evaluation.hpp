#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geoflow/datasets.hpp"
#include "geoflow/run_config.hpp"
#include "geoflow/transport.hpp"

namespace geoflow {

struct EvalOptions {
  std::size_t n_samples = 2000;    // exact-OT comparison sets
  std::size_t n_particles = 500;   // geodesic path comparison
  std::size_t n_velocity = 2000;   // velocity-field comparison points
};

/// Learned-geodesic vs analytic-path comparison on a Gaussian pair.
struct GeodesicComparison {
  double mean_error_t_half = 0.0;      // |sample mean of G(1/2; Z) - analytic midpoint|
  double mean_max_deviation = 0.0;     // mean over particles of max_t |G - path|
  double speed_rel_spread_mean = 0.0;  // mean over particles of (max-min)/mean speed
};

struct EvalReport {
  std::string experiment;
  std::size_t n_samples = 0;
  double w1_pushforward_target = 0.0;
  double w2_pushforward_target = 0.0;
  double w2_squared_pushforward_target = 0.0;
  double w1_target_baseline = 0.0;  // W1 between two independent target draws
  std::vector<double> pushforward_mean;
  std::optional<Matrix> pushforward_cov;  // omitted in high dimension
  std::optional<double> bures_w2_squared_value;
  std::optional<GeodesicComparison> geodesic_vs_mccann;
  std::optional<double> harmonic_trajectory_rmse;
  std::optional<double> velocity_mse_vs_analytic;

  // Sample sets behind the reported transport numbers, for re-verification.
  Matrix pushforward_samples;
  Matrix target_samples;
  Matrix baseline_a;
  Matrix baseline_b;
};

/// Deterministic evaluation of a trained run against fresh seeded samples
/// and, where the experiment has one, the analytic transport oracle.
EvalReport run_evaluation(const RunConfig& cfg, GeodesicNet& geodesic, VelocityNet* velocity,
                          const DistributionSpec& source, const DistributionSpec& target,
                          const EvalOptions& options);

std::string eval_report_to_json(const EvalReport& report);

/// set,x_0..x_{d-1} rows for every sample set in the report.
std::string eval_samples_to_csv(const EvalReport& report);

}  // namespace geoflow
