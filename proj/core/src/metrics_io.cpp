#include "geoflow/metrics_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geoflow {

namespace {

constexpr const char* kHeader = "iteration,cost_estimate,critic_gap,scale_lambda,phase2_mse,wall_ms";

std::string read_if_exists(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_field(std::string& line, const std::optional<double>& v) {
  line.push_back(',');
  if (v.has_value()) line += format_double(*v);
}

std::optional<double> parse_field(const std::string& field) {
  if (field.empty()) return std::nullopt;
  return std::stod(field);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.good()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const MetricsRecord> records, bool append) {
  std::string content;
  if (append) content = read_if_exists(path);
  if (content.empty()) {
    content = kHeader;
    content.push_back('\n');
  }
  for (const MetricsRecord& r : records) {
    std::string line = std::to_string(r.iteration);
    append_field(line, r.cost_estimate);
    append_field(line, r.critic_gap);
    append_field(line, r.scale_lambda);
    append_field(line, r.phase2_mse);
    line.push_back(',');
    line += format_double(r.wall_ms);
    line.push_back('\n');
    content += line;
  }
  write_file_atomic(path, content);
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw std::runtime_error("metrics csv: unexpected header in " + path.string());
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 6) fields.emplace_back();
    MetricsRecord r;
    r.iteration = static_cast<std::size_t>(std::stoull(fields[0]));
    r.cost_estimate = parse_field(fields[1]);
    r.critic_gap = parse_field(fields[2]);
    r.scale_lambda = parse_field(fields[3]);
    r.phase2_mse = parse_field(fields[4]);
    r.wall_ms = fields[5].empty() ? 0.0 : std::stod(fields[5]);
    records.push_back(std::move(r));
  }
  return records;
}

void write_trajectories_csv(const std::filesystem::path& path,
                            std::span<const double> times,
                            std::span<const Matrix> positions_per_time) {
  if (times.size() != positions_per_time.size())
    throw std::invalid_argument("trajectories: one position batch per time required");
  if (times.empty()) throw std::invalid_argument("trajectories: no times");
  const std::size_t n = positions_per_time.front().rows();
  const std::size_t d = positions_per_time.front().cols();

  std::string content = "particle_id,t";
  for (std::size_t j = 0; j < d; ++j) content += ",x_" + std::to_string(j);
  content.push_back('\n');
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Matrix& pos = positions_per_time[k];
      std::string line = std::to_string(i) + "," + format_double(times[k]);
      for (std::size_t j = 0; j < d; ++j) {
        line.push_back(',');
        line += format_double(pos(i, j));
      }
      line.push_back('\n');
      content += line;
    }
  }
  write_file_atomic(path, content);
}

}  // namespace geoflow
