#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "geoflow/run_config.hpp"
#include "geoflow/transport.hpp"

namespace geoflow {

/// Everything needed to resume or evaluate a run; round-trips bit-exactly
/// through JSON.
struct Checkpoint {
  int format_version = 1;
  RunConfig config;
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
  GeodesicNet geodesic;
  CriticNet critic;
  std::optional<VelocityNet> velocity;
};

std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace geoflow
