#include "geoflow/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace geoflow {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : obj.items())
    if (!allowed.contains(item.key()))
      config_error("unknown key \"" + item.key() + "\" in " + where);
}

double get_positive(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const double v = obj.at(key).get<double>();
  if (!(v > 0.0)) config_error(std::string(key) + " must be positive");
  return v;
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback,
                      bool allow_zero = false) {
  if (!obj.contains(key)) return fallback;
  const std::int64_t v = obj.at(key).get<std::int64_t>();
  if (v < (allow_zero ? 0 : 1)) config_error(std::string(key) + " out of range");
  return static_cast<std::size_t>(v);
}

Matrix parse_matrix(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty()) config_error(where + " must be a nonempty array");
  const std::size_t r = rows.size();
  const std::size_t c = rows.at(0).size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const json& row = rows.at(i);
    if (!row.is_array() || row.size() != c) config_error(where + " has ragged rows");
    for (std::size_t j = 0; j < c; ++j) m(i, j) = row.at(j).get<double>();
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

DistConfig parse_dist(const json& obj, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  const std::string type = obj.value("type", "");
  DistConfig d;
  if (type == "gaussian") {
    reject_unknown_keys(obj, {"type", "mean", "cov"}, where);
    d.kind = DistConfig::Kind::gaussian;
    d.mean = obj.at("mean").get<std::vector<double>>();
    d.cov = parse_matrix(obj.at("cov"), where + ".cov");
  } else if (type == "mixture") {
    reject_unknown_keys(obj, {"type", "components"}, where);
    d.kind = DistConfig::Kind::mixture;
    for (const json& comp : obj.at("components")) {
      reject_unknown_keys(comp, {"weight", "mean", "cov"}, where + ".components[]");
      DistConfig::Component c;
      c.weight = comp.at("weight").get<double>();
      c.mean = comp.at("mean").get<std::vector<double>>();
      c.cov = parse_matrix(comp.at("cov"), where + ".components[].cov");
      d.components.push_back(std::move(c));
    }
    if (d.components.empty()) config_error(where + ": mixture needs components");
  } else if (type == "images") {
    reject_unknown_keys(obj, {"type", "images", "labels", "digit", "limit", "downsample"},
                        where);
    d.kind = DistConfig::Kind::images;
    d.images_path = obj.at("images").get<std::string>();
    d.labels_path = obj.at("labels").get<std::string>();
    d.digit = obj.at("digit").get<int>();
    d.limit = get_count(obj, "limit", 0);
    if (d.limit == 0) config_error(where + ": limit must be >= 1");
    d.downsample = obj.value("downsample", false);
  } else {
    config_error(where + ": type must be gaussian, mixture or images");
  }
  return d;
}

json dist_to_json(const DistConfig& d) {
  json obj;
  switch (d.kind) {
    case DistConfig::Kind::gaussian:
      obj["type"] = "gaussian";
      obj["mean"] = d.mean;
      obj["cov"] = matrix_to_json(d.cov);
      break;
    case DistConfig::Kind::mixture: {
      obj["type"] = "mixture";
      json comps = json::array();
      for (const auto& c : d.components) {
        json comp;
        comp["weight"] = c.weight;
        comp["mean"] = c.mean;
        comp["cov"] = matrix_to_json(c.cov);
        comps.push_back(std::move(comp));
      }
      obj["components"] = std::move(comps);
      break;
    }
    case DistConfig::Kind::images:
      obj["type"] = "images";
      obj["images"] = d.images_path.string();
      obj["labels"] = d.labels_path.string();
      obj["digit"] = d.digit;
      obj["limit"] = d.limit;
      obj["downsample"] = d.downsample;
      break;
  }
  return obj;
}

DistConfig gaussian_dist(std::vector<double> mean, Matrix cov) {
  DistConfig d;
  d.kind = DistConfig::Kind::gaussian;
  d.mean = std::move(mean);
  d.cov = std::move(cov);
  return d;
}

void apply_preset(RunConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::synthetic1:
      cfg.source = gaussian_dist({0.0, 0.0}, Matrix::identity(2));
      cfg.target = gaussian_dist({6.0, 6.0}, Matrix::from_rows({{1.5, 0.5}, {0.5, 1.5}}));
      cfg.lagrangian = LagrangianSpec::quadratic();
      cfg.train.m = 10;
      break;
    case Experiment::synthetic2: {
      cfg.source = gaussian_dist({0.0, 0.0}, Matrix::identity(2));
      DistConfig mix;
      mix.kind = DistConfig::Kind::mixture;
      for (const double sx : {-4.0, 4.0})
        for (const double sy : {-4.0, 4.0}) {
          DistConfig::Component c;
          c.weight = 0.25;
          c.mean = {sx, sy};
          c.cov = Matrix::identity(2);
          mix.components.push_back(std::move(c));
        }
      cfg.target = std::move(mix);
      cfg.lagrangian = LagrangianSpec::quadratic();
      cfg.train.m = 10;
      break;
    }
    case Experiment::synthetic3: {
      const std::size_t d = 10;
      Matrix cov(d, d);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) cov(i, j) = (i == j ? 0.5 : 0.0) + 0.05;
      cfg.source = gaussian_dist(std::vector<double>(d, 0.0), Matrix::identity(d));
      cfg.target = gaussian_dist(std::vector<double>(d, 4.0), std::move(cov));
      cfg.lagrangian = LagrangianSpec::quadratic();
      cfg.train.m = 10;
      break;
    }
    case Experiment::synthetic4: {
      Matrix small = Matrix::identity(2);
      small *= 0.01;
      cfg.source = gaussian_dist({3.0, 3.0}, small);
      cfg.target = gaussian_dist({5.0, 5.0}, small);
      cfg.lagrangian = LagrangianSpec::harmonic({1.2, 0.1});
      cfg.train.m = 20;
      break;
    }
    case Experiment::mnist: {
      cfg.lagrangian = LagrangianSpec::quadratic();
      cfg.train.m = 20;
      break;
    }
    case Experiment::custom:
      break;
  }
}

void fill_mnist_dists(RunConfig& cfg) {
  DistConfig a;
  a.kind = DistConfig::Kind::images;
  a.images_path = cfg.mnist.images_a;
  a.labels_path = cfg.mnist.labels_a;
  a.digit = cfg.mnist.digit_a;
  a.limit = cfg.mnist.limit;
  a.downsample = cfg.mnist.downsample;
  DistConfig b = a;
  b.images_path = cfg.mnist.images_b;
  b.labels_path = cfg.mnist.labels_b;
  b.digit = cfg.mnist.digit_b;
  cfg.source = std::move(a);
  cfg.target = std::move(b);
}

void parse_train_block(const json& obj, TrainConfig& train) {
  reject_unknown_keys(obj,
                      {"n", "m", "time_mode", "lr_actor", "lr_critic", "lr_velocity",
                       "lr_scale", "rms_decay", "rms_eps", "iters_phase1", "iters_phase2",
                       "critic_steps_per_actor", "seed", "fd_step", "fresh_samples_phase2"},
                      "train");
  train.n = get_count(obj, "n", train.n);
  train.m = get_count(obj, "m", train.m);
  if (obj.contains("time_mode")) {
    const std::string mode = obj.at("time_mode").get<std::string>();
    if (mode == "grid")
      train.time_mode = TimeMode::grid;
    else if (mode == "uniform")
      train.time_mode = TimeMode::uniform;
    else
      config_error("time_mode must be grid or uniform");
  }
  train.lr_actor = get_positive(obj, "lr_actor", train.lr_actor);
  train.lr_critic = get_positive(obj, "lr_critic", train.lr_critic);
  train.lr_velocity = get_positive(obj, "lr_velocity", train.lr_velocity);
  train.lr_scale = get_positive(obj, "lr_scale", train.lr_scale);
  train.rms_decay = get_positive(obj, "rms_decay", train.rms_decay);
  train.rms_eps = get_positive(obj, "rms_eps", train.rms_eps);
  train.iters_phase1 = get_count(obj, "iters_phase1", train.iters_phase1, true);
  train.iters_phase2 = get_count(obj, "iters_phase2", train.iters_phase2, true);
  train.critic_steps_per_actor =
      get_count(obj, "critic_steps_per_actor", train.critic_steps_per_actor);
  if (obj.contains("seed")) train.seed = obj.at("seed").get<std::uint64_t>();
  train.fd_step = get_positive(obj, "fd_step", train.fd_step);
  if (obj.contains("fresh_samples_phase2"))
    train.fresh_samples_phase2 = obj.at("fresh_samples_phase2").get<bool>();
  train.validate();
}

LagrangianSpec parse_lagrangian(const json& obj) {
  const std::string type = obj.value("type", "");
  if (type == "quadratic") {
    reject_unknown_keys(obj, {"type"}, "lagrangian");
    return LagrangianSpec::quadratic();
  }
  if (type == "harmonic") {
    reject_unknown_keys(obj, {"type", "omega1", "omega2"}, "lagrangian");
    HarmonicSpec h;
    h.omega1 = obj.at("omega1").get<double>();
    h.omega2 = obj.at("omega2").get<double>();
    return LagrangianSpec::harmonic(h);
  }
  config_error("lagrangian type must be quadratic or harmonic");
}

bool uses_images(const RunConfig& cfg) {
  return cfg.experiment == Experiment::mnist ||
         cfg.source.kind == DistConfig::Kind::images ||
         cfg.target.kind == DistConfig::Kind::images;
}

std::size_t declared_dim(const DistConfig& d) {
  switch (d.kind) {
    case DistConfig::Kind::gaussian:
      return d.mean.size();
    case DistConfig::Kind::mixture:
      return d.components.front().mean.size();
    case DistConfig::Kind::images:
      return 0;  // known only after loading
  }
  return 0;
}

}  // namespace

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::synthetic1: return "synthetic1";
    case Experiment::synthetic2: return "synthetic2";
    case Experiment::synthetic3: return "synthetic3";
    case Experiment::synthetic4: return "synthetic4";
    case Experiment::mnist: return "mnist";
    case Experiment::custom: return "custom";
  }
  return "custom";
}

Experiment experiment_from_name(const std::string& name) {
  if (name == "synthetic1") return Experiment::synthetic1;
  if (name == "synthetic2") return Experiment::synthetic2;
  if (name == "synthetic3") return Experiment::synthetic3;
  if (name == "synthetic4") return Experiment::synthetic4;
  if (name == "mnist") return Experiment::mnist;
  if (name == "custom") return Experiment::custom;
  config_error("unknown experiment \"" + name + "\"");
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) config_error("document must be an object");
  reject_unknown_keys(
      doc, {"experiment", "output_dir", "train", "net", "lagrangian", "source", "target",
            "mnist"},
      "document root");

  RunConfig cfg;
  if (!doc.contains("experiment")) config_error("missing experiment");
  cfg.experiment = experiment_from_name(doc.at("experiment").get<std::string>());

  const bool preset = cfg.experiment != Experiment::custom;
  if (preset) {
    for (const char* key : {"source", "target", "lagrangian"})
      if (doc.contains(key))
        config_error(std::string(key) + " is determined by the " +
                     experiment_name(cfg.experiment) + " preset");
    apply_preset(cfg);
  }

  if (cfg.experiment == Experiment::mnist) {
    if (!doc.contains("mnist")) config_error("mnist experiment needs a mnist block");
    const json& m = doc.at("mnist");
    reject_unknown_keys(m,
                        {"images_a", "labels_a", "images_b", "labels_b", "digit_a",
                         "digit_b", "limit", "downsample"},
                        "mnist");
    cfg.mnist.images_a = m.at("images_a").get<std::string>();
    cfg.mnist.labels_a = m.at("labels_a").get<std::string>();
    cfg.mnist.images_b = m.at("images_b").get<std::string>();
    cfg.mnist.labels_b = m.at("labels_b").get<std::string>();
    cfg.mnist.digit_a = m.value("digit_a", cfg.mnist.digit_a);
    cfg.mnist.digit_b = m.value("digit_b", cfg.mnist.digit_b);
    cfg.mnist.limit = get_count(m, "limit", cfg.mnist.limit);
    cfg.mnist.downsample = m.value("downsample", cfg.mnist.downsample);
    fill_mnist_dists(cfg);
  } else if (doc.contains("mnist")) {
    config_error("mnist block is only valid for the mnist experiment");
  }

  if (cfg.experiment == Experiment::custom) {
    if (!doc.contains("source") || !doc.contains("target") || !doc.contains("lagrangian"))
      config_error("custom experiment needs source, target and lagrangian");
    cfg.source = parse_dist(doc.at("source"), "source");
    cfg.target = parse_dist(doc.at("target"), "target");
    cfg.lagrangian = parse_lagrangian(doc.at("lagrangian"));
    const std::size_t da = declared_dim(cfg.source);
    const std::size_t db = declared_dim(cfg.target);
    if (da != 0 && db != 0 && da != db)
      config_error("source and target dimensions differ");
    // Validate numeric distributions eagerly (covariance factorization).
    if (cfg.source.kind != DistConfig::Kind::images) resolve_distribution(cfg.source);
    if (cfg.target.kind != DistConfig::Kind::images) resolve_distribution(cfg.target);
  }

  if (doc.contains("train")) parse_train_block(doc.at("train"), cfg.train);
  cfg.train.validate();

  // Width default: 256 for image experiments, 128 for low-dimensional ones.
  const std::size_t d = declared_dim(cfg.source);
  cfg.net.hidden_width = uses_images(cfg) ? 256 : (d <= 10 ? 128 : 256);
  if (doc.contains("net")) {
    const json& net = doc.at("net");
    reject_unknown_keys(net, {"hidden_width", "hidden_layers"}, "net");
    cfg.net.hidden_width = get_count(net, "hidden_width", cfg.net.hidden_width);
    cfg.net.hidden_layers = get_count(net, "hidden_layers", cfg.net.hidden_layers);
  }

  if (doc.contains("output_dir"))
    cfg.output_dir = doc.at("output_dir").get<std::string>();
  return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& cfg) {
  json doc;
  doc["experiment"] = experiment_name(cfg.experiment);
  doc["output_dir"] = cfg.output_dir.string();

  json train;
  train["n"] = cfg.train.n;
  train["m"] = cfg.train.m;
  train["time_mode"] = cfg.train.time_mode == TimeMode::grid ? "grid" : "uniform";
  train["lr_actor"] = cfg.train.lr_actor;
  train["lr_critic"] = cfg.train.lr_critic;
  train["lr_velocity"] = cfg.train.lr_velocity;
  train["lr_scale"] = cfg.train.lr_scale;
  train["rms_decay"] = cfg.train.rms_decay;
  train["rms_eps"] = cfg.train.rms_eps;
  train["iters_phase1"] = cfg.train.iters_phase1;
  train["iters_phase2"] = cfg.train.iters_phase2;
  train["critic_steps_per_actor"] = cfg.train.critic_steps_per_actor;
  train["seed"] = cfg.train.seed;
  train["fd_step"] = cfg.train.fd_step;
  train["fresh_samples_phase2"] = cfg.train.fresh_samples_phase2;
  doc["train"] = std::move(train);

  json net;
  net["hidden_width"] = cfg.net.hidden_width;
  net["hidden_layers"] = cfg.net.hidden_layers;
  doc["net"] = std::move(net);

  if (cfg.experiment == Experiment::mnist) {
    json m;
    m["images_a"] = cfg.mnist.images_a.string();
    m["labels_a"] = cfg.mnist.labels_a.string();
    m["images_b"] = cfg.mnist.images_b.string();
    m["labels_b"] = cfg.mnist.labels_b.string();
    m["digit_a"] = cfg.mnist.digit_a;
    m["digit_b"] = cfg.mnist.digit_b;
    m["limit"] = cfg.mnist.limit;
    m["downsample"] = cfg.mnist.downsample;
    doc["mnist"] = std::move(m);
  } else if (cfg.experiment == Experiment::custom) {
    doc["source"] = dist_to_json(cfg.source);
    doc["target"] = dist_to_json(cfg.target);
    json lag;
    if (cfg.lagrangian.kind == LagrangianSpec::Kind::quadratic) {
      lag["type"] = "quadratic";
    } else {
      lag["type"] = "harmonic";
      lag["omega1"] = cfg.lagrangian.potential.omega1;
      lag["omega2"] = cfg.lagrangian.potential.omega2;
    }
    doc["lagrangian"] = std::move(lag);
  }
  return doc.dump(2);
}

DistributionSpec resolve_distribution(const DistConfig& cfg) {
  switch (cfg.kind) {
    case DistConfig::Kind::gaussian:
      return DistributionSpec::gaussian(GaussianSpec::make(cfg.mean, cfg.cov));
    case DistConfig::Kind::mixture: {
      std::vector<double> weights;
      std::vector<GaussianSpec> comps;
      for (const auto& c : cfg.components) {
        weights.push_back(c.weight);
        comps.push_back(GaussianSpec::make(c.mean, c.cov));
      }
      return DistributionSpec::mixture(GaussianMixture::make(std::move(weights), std::move(comps)));
    }
    case DistConfig::Kind::images: {
      const IdxFile images = load_idx(cfg.images_path);
      const IdxFile labels = load_idx(cfg.labels_path);
      ImageSet set = select_digits(images, labels, cfg.digit, cfg.limit);
      if (cfg.downsample) set = downsample_half(set);
      return DistributionSpec::images(std::move(set));
    }
  }
  throw std::logic_error("resolve_distribution: unreachable");
}

}  // namespace geoflow
