#include "geoflow/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "geoflow/metrics_io.hpp"
#include "geoflow/trainer.hpp"

namespace geoflow {

using nlohmann::json;

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

Matrix matrix_from_json(const json& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.at(0).size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  return m;
}

json net_to_json(const MlpSpec& spec, const MlpParams& params, std::uint64_t rng_seed) {
  json net;
  json spec_obj;
  spec_obj["layer_sizes"] = spec.layer_sizes;
  spec_obj["lrelu_slope"] = spec.lrelu_slope;
  spec_obj["spectral_norm"] = spec.spectral_norm;
  spec_obj["learnable_scale"] = spec.learnable_scale;
  net["spec"] = std::move(spec_obj);

  json weights = json::array();
  for (const Matrix& w : params.weights) weights.push_back(matrix_to_json(w));
  net["weights"] = std::move(weights);

  json biases = json::array();
  for (const auto& b : params.biases) biases.push_back(b);
  net["biases"] = std::move(biases);

  if (spec.spectral_norm) {
    json uvecs = json::array();
    for (const auto& u : params.power_vecs) uvecs.push_back(u);
    net["power_vecs"] = std::move(uvecs);
  } else {
    net["power_vecs"] = nullptr;
  }
  net["scale"] = spec.learnable_scale ? json(params.scale) : json(nullptr);
  net["rng_seed"] = rng_seed;
  return net;
}

void net_from_json(const json& net, MlpSpec& spec, MlpParams& params) {
  const json& spec_obj = net.at("spec");
  spec.layer_sizes = spec_obj.at("layer_sizes").get<std::vector<std::size_t>>();
  spec.lrelu_slope = spec_obj.at("lrelu_slope").get<double>();
  spec.spectral_norm = spec_obj.at("spectral_norm").get<bool>();
  spec.learnable_scale = spec_obj.at("learnable_scale").get<bool>();
  spec.validate();

  params.weights.clear();
  for (const json& w : net.at("weights")) params.weights.push_back(matrix_from_json(w));
  params.biases = net.at("biases").get<std::vector<std::vector<double>>>();
  params.power_vecs.clear();
  if (!net.at("power_vecs").is_null())
    params.power_vecs = net.at("power_vecs").get<std::vector<std::vector<double>>>();
  params.scale = net.at("scale").is_null() ? 1.0 : net.at("scale").get<double>();

  const std::size_t layers = spec.num_layers();
  if (params.weights.size() != layers || params.biases.size() != layers)
    throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t j = 0; j < layers; ++j) {
    if (params.weights[j].rows() != spec.layer_sizes[j + 1] ||
        params.weights[j].cols() != spec.layer_sizes[j] ||
        params.biases[j].size() != spec.layer_sizes[j + 1])
      throw std::runtime_error("checkpoint: weight shape mismatch");
  }
  if (spec.spectral_norm) {
    if (params.power_vecs.size() != layers)
      throw std::runtime_error("checkpoint: power vector count mismatch");
    for (std::size_t j = 0; j < layers; ++j)
      if (params.power_vecs[j].size() != spec.layer_sizes[j])
        throw std::runtime_error("checkpoint: power vector shape mismatch");
  }
}

std::uint64_t init_stream_key(std::uint64_t seed, std::uint64_t stream) {
  return SeededRng(seed).split(stream).key();
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ck) {
  json doc;
  doc["format_version"] = ck.format_version;
  doc["config"] = json::parse(config_to_json(ck.config));
  doc["iteration"] = ck.iteration;
  doc["seed"] = ck.seed;

  json geo;
  geo["dim"] = ck.geodesic.dim;
  geo["fd_step"] = ck.geodesic.fd_step;
  geo["net"] = net_to_json(ck.geodesic.spec, ck.geodesic.params,
                           init_stream_key(ck.seed, stream::kActorInit));
  doc["geodesic"] = std::move(geo);

  json critic;
  critic["net"] = net_to_json(ck.critic.spec, ck.critic.params,
                              init_stream_key(ck.seed, stream::kCriticInit));
  doc["critic"] = std::move(critic);

  if (ck.velocity.has_value()) {
    json vel;
    vel["dim"] = ck.velocity->dim;
    vel["net"] = net_to_json(ck.velocity->spec, ck.velocity->params,
                             init_stream_key(ck.seed, stream::kVelocityInit));
    doc["velocity"] = std::move(vel);
  } else {
    doc["velocity"] = nullptr;
  }
  return doc.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  Checkpoint ck;
  ck.format_version = doc.at("format_version").get<int>();
  if (ck.format_version != 1)
    throw std::runtime_error("checkpoint: unsupported format version");
  ck.config = parse_config(doc.at("config").dump());
  ck.iteration = doc.at("iteration").get<std::size_t>();
  ck.seed = doc.at("seed").get<std::uint64_t>();

  const json& geo = doc.at("geodesic");
  ck.geodesic.dim = geo.at("dim").get<std::size_t>();
  ck.geodesic.fd_step = geo.at("fd_step").get<double>();
  net_from_json(geo.at("net"), ck.geodesic.spec, ck.geodesic.params);
  if (ck.geodesic.spec.input_dim() != ck.geodesic.dim + 1 ||
      ck.geodesic.spec.output_dim() != ck.geodesic.dim)
    throw std::runtime_error("checkpoint: geodesic net dimensions inconsistent");

  net_from_json(doc.at("critic").at("net"), ck.critic.spec, ck.critic.params);
  if (ck.critic.spec.input_dim() != ck.geodesic.dim || ck.critic.spec.output_dim() != 1)
    throw std::runtime_error("checkpoint: critic net dimensions inconsistent");

  if (!doc.at("velocity").is_null()) {
    VelocityNet vn;
    vn.dim = doc.at("velocity").at("dim").get<std::size_t>();
    net_from_json(doc.at("velocity").at("net"), vn.spec, vn.params);
    if (vn.spec.input_dim() != vn.dim + 1 || vn.spec.output_dim() != vn.dim)
      throw std::runtime_error("checkpoint: velocity net dimensions inconsistent");
    ck.velocity = std::move(vn);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomic(path, checkpoint_to_json(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace geoflow
