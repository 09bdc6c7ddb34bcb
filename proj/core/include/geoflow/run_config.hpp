#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geoflow/datasets.hpp"
#include "geoflow/trainer.hpp"
#include "geoflow/transport.hpp"

namespace geoflow {

enum class Experiment { synthetic1, synthetic2, synthetic3, synthetic4, mnist, custom };

std::string experiment_name(Experiment e);
Experiment experiment_from_name(const std::string& name);

/// Declarative description of a sampling distribution; resolved into a
/// DistributionSpec (loading image files if needed) at run time.
struct DistConfig {
  enum class Kind { gaussian, mixture, images };
  Kind kind = Kind::gaussian;

  // gaussian
  std::vector<double> mean;
  Matrix cov;

  // mixture
  struct Component {
    double weight = 0.0;
    std::vector<double> mean;
    Matrix cov;
  };
  std::vector<Component> components;

  // images
  std::filesystem::path images_path;
  std::filesystem::path labels_path;
  int digit = 0;
  std::size_t limit = 0;
  bool downsample = false;
};

struct MnistOptions {
  std::filesystem::path images_a, labels_a, images_b, labels_b;
  int digit_a = 6;
  int digit_b = 9;
  std::size_t limit = 2000;
  bool downsample = true;  // 28x28 -> 14x14
};

struct RunConfig {
  Experiment experiment = Experiment::custom;
  DistConfig source;
  DistConfig target;
  LagrangianSpec lagrangian = LagrangianSpec::quadratic();
  TrainConfig train;
  NetShape net;
  std::filesystem::path output_dir = ".";
  MnistOptions mnist;  // meaningful iff experiment == mnist
};

/// Strict parser: unknown keys are rejected, presets fill the distribution
/// and Lagrangian fields, remaining defaults are materialized into the
/// returned config.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::filesystem::path& path);

/// Canonical JSON echo of a resolved config; parse_config(config_to_json(c))
/// reproduces c.
std::string config_to_json(const RunConfig& cfg);

/// Builds the sampler, loading and filtering image files for image kinds.
DistributionSpec resolve_distribution(const DistConfig& cfg);

}  // namespace geoflow
