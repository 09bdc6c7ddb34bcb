// End-to-end tests of the command-line binary: every subcommand runs against
// real files in a scratch directory. The binary path arrives via GEOFLOW_BIN.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "geoflow/checkpoint.hpp"
#include "geoflow/metrics_io.hpp"
#include "geoflow/oracles.hpp"
#include "geoflow/run_config.hpp"

using namespace geoflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string binary() {
  const char* bin = std::getenv("GEOFLOW_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "GEOFLOW_BIN must point at the geoflow binary");
  return bin;
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "geoflow_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = binary() + " " + args + " > " + (scratch() / "out.txt").string() +
                          " 2> " + (scratch() / "err.txt").string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string last_stdout() {
  std::ifstream in(scratch() / "out.txt");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), ("missing file " + path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTinyConfig = R"({
  "experiment": "custom",
  "source": {"type": "gaussian", "mean": [0, 0], "cov": [[1, 0], [0, 1]]},
  "target": {"type": "gaussian", "mean": [2, 2], "cov": [[1, 0], [0, 1]]},
  "lagrangian": {"type": "quadratic"},
  "train": {"n": 16, "m": 4, "iters_phase1": 40, "iters_phase2": 30, "seed": 5},
  "net": {"hidden_width": 16}
})";

}  // namespace

TEST_CASE("train writes a checkpoint and a reproducible metrics stream") {
  const fs::path dir = scratch();
  const fs::path config = dir / "tiny.json";
  write_file_atomic(config, kTinyConfig);

  const fs::path run_a = dir / "run_a";
  const fs::path run_b = dir / "run_b";
  fs::remove_all(run_a);
  fs::remove_all(run_b);

  REQUIRE(run("train --config " + config.string() + " --output-dir " + run_a.string()) == 0);
  REQUIRE(fs::exists(run_a / "checkpoint.json"));
  REQUIRE(fs::exists(run_a / "metrics.csv"));
  CHECK(read_metrics_csv(run_a / "metrics.csv").size() == 40);

  REQUIRE(run("train --config " + config.string() + " --output-dir " + run_b.string()) == 0);
  CHECK(slurp(run_a / "metrics.csv") == slurp(run_b / "metrics.csv"));

  SUBCASE("train-velocity extends the checkpoint and appends metrics") {
    REQUIRE(run("train-velocity --checkpoint " + (run_a / "checkpoint.json").string()) == 0);
    const Checkpoint ck = load_checkpoint(run_a / "checkpoint.json");
    REQUIRE(ck.velocity.has_value());
    CHECK(ck.iteration == 70);
    const auto metrics = read_metrics_csv(run_a / "metrics.csv");
    REQUIRE(metrics.size() == 70);
    CHECK(metrics.back().phase2_mse.has_value());
    CHECK(!metrics.back().cost_estimate.has_value());
    // iterations stay strictly increasing across the appended stream
    for (std::size_t i = 1; i < metrics.size(); ++i)
      CHECK(metrics[i].iteration > metrics[i - 1].iteration);
  }

  SUBCASE("eval reports finite reproducible transport numbers") {
    REQUIRE(run("eval --checkpoint " + (run_a / "checkpoint.json").string() +
                " --samples 128 --particles 64") == 0);
    const json report = json::parse(slurp(run_a / "eval.json"));
    CHECK(report.at("w1_pushforward_target").get<double>() > 0.0);
    CHECK(report.at("w1_target_baseline").get<double>() > 0.0);
    CHECK(std::isfinite(report.at("w2_squared_pushforward_target").get<double>()));

    // The exported samples reproduce the reported W1 exactly.
    std::ifstream in(run_a / "eval_samples.csv");
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "set,x_0,x_1");
    std::vector<std::vector<double>> push, target;
    while (std::getline(in, line)) {
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      const std::string set = line.substr(0, c1);
      const double x0 = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      const double x1 = std::stod(line.substr(c2 + 1));
      if (set == "pushforward") push.push_back({x0, x1});
      if (set == "target") target.push_back({x0, x1});
    }
    REQUIRE(push.size() == 128);
    REQUIRE(target.size() == 128);
    Matrix pm(push.size(), 2), tm(target.size(), 2);
    for (std::size_t i = 0; i < push.size(); ++i) {
      pm(i, 0) = push[i][0];
      pm(i, 1) = push[i][1];
      tm(i, 0) = target[i][0];
      tm(i, 1) = target[i][1];
    }
    const double recomputed = empirical_wasserstein(pm, tm, 1);
    CHECK(recomputed ==
          doctest::Approx(report.at("w1_pushforward_target").get<double>()).epsilon(1e-12));
  }
}

TEST_CASE("export walks a hand-built constant displacement field") {
  const fs::path dir = scratch();
  // Zero geodesic weights except a constant bias: F == (2, -1).
  RunConfig cfg = parse_config(kTinyConfig);
  SeededRng rng(1);
  Checkpoint ck;
  ck.config = cfg;
  ck.seed = cfg.train.seed;
  ck.geodesic = make_geodesic_net(2, 16, 3, rng);
  for (Matrix& w : ck.geodesic.params.weights)
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
  for (auto& b : ck.geodesic.params.biases) std::fill(b.begin(), b.end(), 0.0);
  ck.geodesic.params.biases.back() = {2.0, -1.0};
  ck.critic = make_critic_net(2, 16, 3, rng);
  const fs::path ck_path = dir / "constant_field.json";
  save_checkpoint(ck_path, ck);

  REQUIRE(run("export --checkpoint " + ck_path.string() + " --times 0,0.5,1 --n 2") == 0);
  std::ifstream in(dir / "trajectories.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "particle_id,t,x_0,x_1");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    rows.push_back(std::move(row));
  }
  REQUIRE(rows.size() == 6);
  for (int p = 0; p < 2; ++p) {
    const auto& at0 = rows[3 * p];
    const auto& at_half = rows[3 * p + 1];
    const auto& at1 = rows[3 * p + 2];
    CHECK(at_half[2] == doctest::Approx(at0[2] + 1.0));   // + 0.5 * 2
    CHECK(at_half[3] == doctest::Approx(at0[3] - 0.5));   // + 0.5 * -1
    CHECK(at1[2] == doctest::Approx(at0[2] + 2.0));
    CHECK(at1[3] == doctest::Approx(at0[3] - 1.0));
  }
}

TEST_CASE("eval of an identity map between equal distributions sits at the noise floor") {
  const fs::path dir = scratch();
  const std::string same = R"({
    "experiment": "custom",
    "source": {"type": "gaussian", "mean": [1, 1], "cov": [[1, 0], [0, 1]]},
    "target": {"type": "gaussian", "mean": [1, 1], "cov": [[1, 0], [0, 1]]},
    "lagrangian": {"type": "quadratic"},
    "train": {"n": 16, "seed": 3},
    "net": {"hidden_width": 16}
  })";
  RunConfig cfg = parse_config(same);
  SeededRng rng(2);
  Checkpoint ck;
  ck.config = cfg;
  ck.seed = cfg.train.seed;
  ck.geodesic = make_geodesic_net(2, 16, 3, rng);
  for (Matrix& w : ck.geodesic.params.weights)
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
  for (auto& b : ck.geodesic.params.biases) std::fill(b.begin(), b.end(), 0.0);
  ck.critic = make_critic_net(2, 16, 3, rng);
  const fs::path ck_path = dir / "identity.json";
  save_checkpoint(ck_path, ck);

  REQUIRE(run("eval --checkpoint " + ck_path.string() + " --samples 256") == 0);
  const json report = json::parse(slurp(dir / "eval.json"));
  const double w1 = report.at("w1_pushforward_target").get<double>();
  const double baseline = report.at("w1_target_baseline").get<double>();
  CHECK(w1 <= 2.0 * baseline);
}

TEST_CASE("oracle prints the analytic synthetic-1 value") {
  REQUIRE(run("oracle --experiment synthetic1") == 0);
  CHECK(last_stdout().find("72.171573") != std::string::npos);

  REQUIRE(run("oracle --experiment synthetic4 --times 0,0.5,1") == 0);
  const std::string out = last_stdout();
  CHECK(out.find("4.846513") != std::string::npos);  // analytic midpoint x1
  CHECK(out.find("4.005005") != std::string::npos);  // analytic midpoint x2 (= 4.0050052)
}

TEST_CASE("failures exit nonzero with a message") {
  CHECK(run("eval --checkpoint /does/not/exist.json") != 0);
  CHECK(run("oracle --experiment synthetic2") != 0);
  const fs::path bad = scratch() / "bad.json";
  write_file_atomic(bad, R"({"experiment":"synthetic1","train":{"n":-1}})");
  CHECK(run("train --config " + bad.string()) != 0);
}
