#include <cmath>

#include <doctest.h>

#include "geoflow/rng.hpp"
#include "geoflow/transport.hpp"

using namespace geoflow;

namespace {

// F identically equal to a constant: zero weights, bias c in the last layer.
GeodesicNet constant_field_net(double c0, double c1) {
  SeededRng rng(1);
  GeodesicNet g = make_geodesic_net(2, 8, 2, rng);
  for (Matrix& w : g.params.weights)
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
  for (auto& b : g.params.biases) std::fill(b.begin(), b.end(), 0.0);
  g.params.biases.back() = {c0, c1};
  return g;
}

Matrix random_batch(std::size_t n, std::size_t d, SeededRng& rng) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_gaussian();
  return m;
}

}  // namespace

TEST_CASE("the map is exactly the identity at t = 0") {
  SeededRng rng(2);
  GeodesicNet g = make_geodesic_net(3, 16, 3, rng);
  const Matrix z = random_batch(10, 3, rng);
  const Matrix out = g_eval(g, z, 0.0);
  CHECK(max_abs_diff(out, z) == 0.0);
}

TEST_CASE("a constant displacement field moves points linearly in time") {
  GeodesicNet g = constant_field_net(2.0, -1.0);
  const Matrix z = Matrix::from_rows({{0.5, 0.5}, {-1.0, 3.0}});
  const Matrix mid = g_eval(g, z, 0.5);
  CHECK(mid(0, 0) == doctest::Approx(1.5));
  CHECK(mid(0, 1) == doctest::Approx(0.0));
  CHECK(mid(1, 0) == doctest::Approx(0.0));
  CHECK(mid(1, 1) == doctest::Approx(2.5));

  // Derivative equals the constant exactly: no kink sits between t +- h.
  const Matrix vel = g_dt(g, z, 0.5);
  CHECK(vel(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(vel(0, 1) == doctest::Approx(-1.0).epsilon(1e-10));

  // Boundary times run the one-sided stencils.
  const Matrix vel0 = g_dt(g, z, 0.0);
  const Matrix vel1 = g_dt(g, z, 1.0);
  CHECK(vel0(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(vel1(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("a hand-built linear map has derivative 2z") {
  // F(z, t) = 2z via a single weight matrix [2I | 0].
  SeededRng rng(3);
  GeodesicNet g;
  g.dim = 2;
  g.fd_step = 1e-3;
  g.spec.layer_sizes = {3, 2};
  g.params.weights.push_back(Matrix::from_rows({{2.0, 0.0, 0.0}, {0.0, 2.0, 0.0}}));
  g.params.biases.push_back({0.0, 0.0});

  const Matrix z = random_batch(5, 2, rng);
  const Matrix vel = g_dt(g, z, 0.4);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(vel(i, j) == doctest::Approx(2.0 * z(i, j)).epsilon(1e-9));

  const Matrix exact = g_dt_exact(g, z, 0.4);
  CHECK(max_abs_diff(exact, vel) < 1e-9);
}

TEST_CASE("time out of range is rejected") {
  SeededRng rng(4);
  GeodesicNet g = make_geodesic_net(2, 8, 2, rng);
  const Matrix z = random_batch(2, 2, rng);
  CHECK_THROWS(g_eval(g, z, -0.1));
  CHECK_THROWS(g_eval(g, z, 1.1));
}

TEST_CASE("central differences agree with tangent propagation away from kinks") {
  SeededRng rng(5);
  GeodesicNet g = make_geodesic_net(2, 16, 2, rng);
  std::size_t hits = 0, total = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const Matrix z = random_batch(1, 2, rng);
    const double t = 0.05 + 0.9 * rng.next_double();
    const Matrix fd = g_dt(g, z, t);
    const Matrix exact = g_dt_exact(g, z, t);
    ++total;
    if (max_abs_diff(fd, exact) < 1e-6) ++hits;
  }
  // Kink crossings within the stencil width are excluded by the slack.
  CHECK(hits >= total * 95 / 100);
}

TEST_CASE("geodesic backward routes the time factor") {
  GeodesicNet g = constant_field_net(0.0, 0.0);
  SeededRng rng(6);
  const Matrix z = random_batch(3, 2, rng);
  const GeodesicEval eval = g_eval_traced(g, z, 0.5);
  Matrix upstream(3, 2, 1.0);
  const GradBundle grads = g_backward(g, eval, upstream);
  // dG/d(last bias) = t for every sample.
  CHECK(grads.d_biases.back()[0] == doctest::Approx(0.5 * 3.0));
  CHECK(grads.d_biases.back()[1] == doctest::Approx(0.5 * 3.0));
}

TEST_CASE("critic conveniences") {
  SeededRng rng(7);
  CriticNet c = make_critic_net(2, 16, 3, rng);
  const Matrix x = random_batch(6, 2, rng);

  SUBCASE("zero weights give zero scores") {
    for (Matrix& w : c.params.weights)
      for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
    const std::vector<double> scores = critic_eval(c, x, RunMode::eval);
    for (double s : scores) CHECK(s == 0.0);
  }

  SUBCASE("zero scale annihilates the output") {
    c.params.scale = 0.0;
    const std::vector<double> scores = critic_eval(c, x, RunMode::eval);
    for (double s : scores) CHECK(s == 0.0);
  }

  SUBCASE("sampled Lipschitz ratio respects the scaled bound") {
    Matrix warm = random_batch(32, 2, rng);
    for (int i = 0; i < 50; ++i) critic_eval(c, warm, RunMode::train);
    const double bound = std::abs(c.params.scale) * std::pow(1.05, 4);
    for (int pair = 0; pair < 10000; ++pair) {
      const Matrix xy = random_batch(2, 2, rng);
      const std::vector<double> s = critic_eval(c, xy, RunMode::eval);
      double dist = std::hypot(xy(0, 0) - xy(1, 0), xy(0, 1) - xy(1, 1));
      REQUIRE(std::abs(s[0] - s[1]) <= bound * dist + 1e-12);
    }
  }
}

TEST_CASE("lagrangian evaluations") {
  const LagrangianSpec quad = LagrangianSpec::quadratic();
  const Matrix x = Matrix::from_rows({{0.0, 0.0}});
  const Matrix v = Matrix::from_rows({{3.0, 4.0}});
  const LagrangianEval q = lagrangian_eval(quad, x, v, 0.5);
  CHECK(q.cost[0] == doctest::Approx(25.0));
  CHECK(q.d_v(0, 0) == doctest::Approx(6.0));
  CHECK(q.d_v(0, 1) == doctest::Approx(8.0));
  CHECK(q.d_x(0, 0) == 0.0);

  const LagrangianSpec harm = LagrangianSpec::harmonic({1.2, 0.1});
  const Matrix x1 = Matrix::from_rows({{1.0, 1.0}});
  const Matrix v0 = Matrix::from_rows({{0.0, 0.0}});
  const LagrangianEval h = lagrangian_eval(harm, x1, v0, 0.0);
  CHECK(h.cost[0] == doctest::Approx(-0.725));
  CHECK(h.d_v(0, 0) == 0.0);
  CHECK(h.d_x(0, 0) == doctest::Approx(-1.44));
  CHECK(h.d_x(0, 1) == doctest::Approx(-0.01));

  const LagrangianEval zero = lagrangian_eval(harm, x * 0.0, v0, 0.3);
  CHECK(zero.cost[0] == 0.0);
}

TEST_CASE("harmonic position gradient matches finite differences of the cost") {
  const LagrangianSpec harm = LagrangianSpec::harmonic({1.2, 0.1});
  SeededRng rng(8);
  const Matrix x = random_batch(4, 2, rng);
  const Matrix v = random_batch(4, 2, rng);
  const LagrangianEval eval = lagrangian_eval(harm, x, v, 0.2);
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      Matrix xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      const double fd = (lagrangian_eval(harm, xp, v, 0.2).cost[i] -
                         lagrangian_eval(harm, xm, v, 0.2).cost[i]) /
                        (2.0 * h);
      CHECK(eval.d_x(i, j) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("harmonic frequencies outside (0, pi) are rejected") {
  CHECK_THROWS(LagrangianSpec::harmonic({0.0, 0.1}));
  CHECK_THROWS(LagrangianSpec::harmonic({1.2, 3.2}));
}

TEST_CASE("velocity net basics") {
  SeededRng rng(9);
  VelocityNet vn = make_velocity_net(2, 8, 2, rng);
  const Matrix x = random_batch(4, 2, rng);

  const Matrix a = velocity_eval(vn, x, 0.25);
  const Matrix b = velocity_eval(vn, x, 0.25);
  CHECK(max_abs_diff(a, b) == 0.0);

  const std::vector<double> per_row = {0.25, 0.25, 0.25, 0.25};
  const Matrix c = velocity_eval(vn, x, per_row);
  CHECK(max_abs_diff(a, c) == 0.0);

  for (Matrix& w : vn.params.weights)
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
  for (auto& bias : vn.params.biases) std::fill(bias.begin(), bias.end(), 0.0);
  const Matrix zero = velocity_eval(vn, x, 0.7);
  CHECK(max_abs(zero) == 0.0);
}
