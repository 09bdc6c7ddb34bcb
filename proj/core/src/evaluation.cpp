#include "geoflow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "geoflow/metrics_io.hpp"
#include "geoflow/oracles.hpp"
#include "geoflow/trainer.hpp"

namespace geoflow {

using nlohmann::json;

namespace {

std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

Matrix sample_covariance(const Matrix& m, const std::vector<double>& mean) {
  const std::size_t d = m.cols();
  Matrix cov(d, d);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row_ptr(i);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        cov(a, b) += (row[a] - mean[a]) * (row[b] - mean[b]);
  }
  cov *= 1.0 / static_cast<double>(m.rows() - 1);
  return cov;
}

double row_norm(const Matrix& m, std::size_t i) {
  const double* row = m.row_ptr(i);
  double s = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) s += row[j] * row[j];
  return std::sqrt(s);
}

const GaussianSpec* as_gaussian(const DistributionSpec& spec) {
  return std::get_if<GaussianSpec>(&spec.value);
}

GeodesicComparison compare_with_mccann(GeodesicNet& g, const GaussianSpec& a,
                                       const GaussianSpec& b, const Matrix& particles) {
  GeodesicComparison cmp;
  const std::size_t n = particles.rows();
  const std::vector<double> t_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  std::vector<double> max_dev(n, 0.0);
  std::vector<double> speed_min(n, std::numeric_limits<double>::infinity());
  std::vector<double> speed_max(n, 0.0);
  std::vector<double> speed_sum(n, 0.0);

  for (const double t : t_grid) {
    const Matrix pos = g_eval(g, particles, t);
    const Matrix analytic = mccann_interpolant(a, b, particles, t).position;
    const Matrix vel = g_dt(g, particles, t);
    for (std::size_t i = 0; i < n; ++i) {
      double dev = 0.0;
      for (std::size_t j = 0; j < particles.cols(); ++j) {
        const double d = pos(i, j) - analytic(i, j);
        dev += d * d;
      }
      max_dev[i] = std::max(max_dev[i], std::sqrt(dev));
      const double speed = row_norm(vel, i);
      speed_min[i] = std::min(speed_min[i], speed);
      speed_max[i] = std::max(speed_max[i], speed);
      speed_sum[i] += speed;
    }
  }

  double mean_dev = 0.0, mean_spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_dev += max_dev[i];
    const double mean_speed = speed_sum[i] / static_cast<double>(t_grid.size());
    mean_spread += mean_speed > 0.0 ? (speed_max[i] - speed_min[i]) / mean_speed : 0.0;
  }
  cmp.mean_max_deviation = mean_dev / static_cast<double>(n);
  cmp.speed_rel_spread_mean = mean_spread / static_cast<double>(n);

  const Matrix mid = g_eval(g, particles, 0.5);
  const std::vector<double> mid_mean = column_means(mid);
  double err = 0.0;
  for (std::size_t j = 0; j < mid_mean.size(); ++j) {
    const double target = 0.5 * (a.mean[j] + b.mean[j]);
    err += (mid_mean[j] - target) * (mid_mean[j] - target);
  }
  cmp.mean_error_t_half = std::sqrt(err);
  return cmp;
}

double harmonic_rmse(GeodesicNet& g, const HarmonicOracle& oracle, const Matrix& particles) {
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (int k = 1; k <= 19; ++k) {
    const double t = 0.05 * k;
    const Matrix pos = g_eval(g, particles, t);
    const Matrix analytic = harmonic_positions(oracle, particles, t);
    for (std::size_t i = 0; i < particles.rows(); ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < 2; ++j) {
        const double d = pos(i, j) - analytic(i, j);
        d2 += d * d;
      }
      sum_sq += d2;
      ++count;
    }
  }
  return std::sqrt(sum_sq / static_cast<double>(count));
}

// Mean squared deviation between the learned field and the analytic one,
// measured on the transport support: points x = G(u; z), z fresh source
// draws, u fresh uniform times.
template <typename AnalyticField>
double velocity_mse(GeodesicNet& g, VelocityNet& vn, const DistributionSpec& source,
                    SeededRng& z_rng, SeededRng& t_rng, std::size_t n_points,
                    AnalyticField&& analytic) {
  const std::size_t batches = 20;
  const std::size_t per_batch = std::max<std::size_t>(1, n_points / batches);
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < batches; ++k) {
    const double u = t_rng.next_double();
    const Matrix z = sample(source, per_batch, z_rng);
    const Matrix x = g_eval(g, z, u);
    const Matrix predicted = velocity_eval(vn, x, u);
    const Matrix expected = analytic(x, u);
    for (std::size_t i = 0; i < predicted.rows(); ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < predicted.cols(); ++j) {
        const double d = predicted(i, j) - expected(i, j);
        d2 += d * d;
      }
      sum_sq += d2;
      ++count;
    }
  }
  return sum_sq / static_cast<double>(count);
}

}  // namespace

EvalReport run_evaluation(const RunConfig& cfg, GeodesicNet& geodesic, VelocityNet* velocity,
                          const DistributionSpec& source, const DistributionSpec& target,
                          const EvalOptions& options) {
  SeededRng root = SeededRng(cfg.train.seed).split(stream::kEval);
  SeededRng z_rng = root.split(1);
  SeededRng y_rng = root.split(2);
  SeededRng base_a_rng = root.split(3);
  SeededRng base_b_rng = root.split(4);
  SeededRng particle_rng = root.split(5);
  SeededRng vel_z_rng = root.split(6);
  SeededRng vel_t_rng = root.split(7);

  EvalReport report;
  report.experiment = experiment_name(cfg.experiment);
  report.n_samples = options.n_samples;

  const Matrix z = sample(source, options.n_samples, z_rng);
  report.pushforward_samples = g_eval(geodesic, z, 1.0);
  report.target_samples = sample(target, options.n_samples, y_rng);
  report.baseline_a = sample(target, options.n_samples, base_a_rng);
  report.baseline_b = sample(target, options.n_samples, base_b_rng);

  report.w1_pushforward_target =
      empirical_wasserstein(report.pushforward_samples, report.target_samples, 1);
  report.w2_pushforward_target =
      empirical_wasserstein(report.pushforward_samples, report.target_samples, 2);
  report.w2_squared_pushforward_target =
      report.w2_pushforward_target * report.w2_pushforward_target;
  report.w1_target_baseline = empirical_wasserstein(report.baseline_a, report.baseline_b, 1);

  report.pushforward_mean = column_means(report.pushforward_samples);
  if (report.pushforward_samples.cols() <= 16)
    report.pushforward_cov =
        sample_covariance(report.pushforward_samples, report.pushforward_mean);

  const GaussianSpec* ga = as_gaussian(source);
  const GaussianSpec* gb = as_gaussian(target);
  const bool quadratic = cfg.lagrangian.kind == LagrangianSpec::Kind::quadratic;

  if (ga != nullptr && gb != nullptr && quadratic) {
    report.bures_w2_squared_value = bures_w2_squared(*ga, *gb);
    const Matrix particles = sample(source, options.n_particles, particle_rng);
    report.geodesic_vs_mccann = compare_with_mccann(geodesic, *ga, *gb, particles);
    if (velocity != nullptr) {
      report.velocity_mse_vs_analytic =
          velocity_mse(geodesic, *velocity, source, vel_z_rng, vel_t_rng, options.n_velocity,
                       [&](const Matrix& x, double u) {
                         return gaussian_velocity_at(*ga, *gb, x, u);
                       });
    }
  }

  if (ga != nullptr && gb != nullptr && !quadratic && ga->dim() == 2) {
    HarmonicOracle oracle;
    oracle.spec = cfg.lagrangian.potential;
    oracle.mean_a = {ga->mean[0], ga->mean[1]};
    oracle.mean_b = {gb->mean[0], gb->mean[1]};
    const std::size_t n_particles = std::min<std::size_t>(options.n_particles, 200);
    const Matrix particles = sample(source, n_particles, particle_rng);
    report.harmonic_trajectory_rmse = harmonic_rmse(geodesic, oracle, particles);
    if (velocity != nullptr) {
      report.velocity_mse_vs_analytic =
          velocity_mse(geodesic, *velocity, source, vel_z_rng, vel_t_rng, options.n_velocity,
                       [&](const Matrix& x, double u) {
                         return harmonic_velocity_at(oracle, x, u);
                       });
    }
  }
  return report;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  json doc;
  doc["experiment"] = report.experiment;
  doc["n_samples"] = report.n_samples;
  doc["w1_pushforward_target"] = report.w1_pushforward_target;
  doc["w2_pushforward_target"] = report.w2_pushforward_target;
  doc["w2_squared_pushforward_target"] = report.w2_squared_pushforward_target;
  doc["w1_target_baseline"] = report.w1_target_baseline;
  doc["pushforward_mean"] = report.pushforward_mean;
  doc["pushforward_cov"] =
      report.pushforward_cov.has_value() ? matrix_to_json(*report.pushforward_cov) : json();
  doc["bures_w2_squared"] = report.bures_w2_squared_value.has_value()
                                ? json(*report.bures_w2_squared_value)
                                : json();
  if (report.geodesic_vs_mccann.has_value()) {
    json cmp;
    cmp["mean_error_t_half"] = report.geodesic_vs_mccann->mean_error_t_half;
    cmp["mean_max_deviation"] = report.geodesic_vs_mccann->mean_max_deviation;
    cmp["speed_rel_spread_mean"] = report.geodesic_vs_mccann->speed_rel_spread_mean;
    doc["geodesic_vs_mccann"] = std::move(cmp);
  } else {
    doc["geodesic_vs_mccann"] = nullptr;
  }
  doc["harmonic_trajectory_rmse"] = report.harmonic_trajectory_rmse.has_value()
                                        ? json(*report.harmonic_trajectory_rmse)
                                        : json();
  doc["velocity_mse_vs_analytic"] = report.velocity_mse_vs_analytic.has_value()
                                        ? json(*report.velocity_mse_vs_analytic)
                                        : json();
  return doc.dump(2);
}

std::string eval_samples_to_csv(const EvalReport& report) {
  const std::size_t d = report.pushforward_samples.cols();
  std::string content = "set";
  for (std::size_t j = 0; j < d; ++j) content += ",x_" + std::to_string(j);
  content.push_back('\n');
  const auto emit = [&](const char* name, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      content += name;
      for (std::size_t j = 0; j < d; ++j) {
        content.push_back(',');
        content += format_double(m(i, j));
      }
      content.push_back('\n');
    }
  };
  emit("pushforward", report.pushforward_samples);
  emit("target", report.target_samples);
  emit("baseline_a", report.baseline_a);
  emit("baseline_b", report.baseline_b);
  return content;
}

}  // namespace geoflow
