#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geoflow/matrix.hpp"
#include "geoflow/trainer.hpp"

namespace geoflow {

/// Appends or rewrites the metrics stream as CSV with header
/// iteration,cost_estimate,critic_gap,scale_lambda,phase2_mse,wall_ms.
/// Absent fields stay empty. The write is atomic (temp file + rename).
void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const MetricsRecord> records, bool append);

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

/// Rows particle_id,t,x_0..x_{d-1}, grouped by particle with times ascending.
void write_trajectories_csv(const std::filesystem::path& path,
                            std::span<const double> times,
                            std::span<const Matrix> positions_per_time);

/// Atomic small-file write used for every artifact the toolkit produces.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Full-precision decimal formatting (round-trips doubles exactly).
std::string format_double(double v);

}  // namespace geoflow
