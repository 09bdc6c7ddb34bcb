#include <benchmark/benchmark.h>

#include "geoflow/mlp.hpp"
#include "geoflow/oracles.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/trainer.hpp"
#include "geoflow/transport.hpp"

using namespace geoflow;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_gaussian();
  return m;
}

void BM_MatMul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  SeededRng rng(1);
  const Matrix a = random_matrix(n, 128, rng);
  const Matrix b = random_matrix(128, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * 128 * 128);
}
BENCHMARK(BM_MatMul)->Arg(256)->Arg(2560);

void BM_MlpForwardBackward(benchmark::State& state) {
  SeededRng rng(2);
  MlpSpec spec;
  spec.layer_sizes = {3, 128, 128, 128, 2};
  MlpParams params = mlp_init(spec, rng);
  const Matrix x = random_matrix(state.range(0), 3, rng);
  const Matrix upstream = random_matrix(state.range(0), 2, rng);
  for (auto _ : state) {
    ForwardTape tape;
    mlp_forward(spec, params, x, RunMode::eval, &tape);
    benchmark::DoNotOptimize(mlp_backward(spec, params, tape, upstream));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(256)->Arg(2560);

void BM_ActorStep(benchmark::State& state) {
  SeededRng rng(3);
  GeodesicNet g = make_geodesic_net(2, 128, 3, rng);
  CriticNet c = make_critic_net(2, 128, 3, rng);
  TrainConfig cfg;
  cfg.n = 256;
  RmspropState opt = RmspropState::zeros_like(g.spec);
  const Matrix z = random_matrix(cfg.n, 2, rng);
  const std::vector<double> times = time_grid(10);
  const LagrangianSpec lag = LagrangianSpec::quadratic();
  for (auto _ : state)
    benchmark::DoNotOptimize(actor_step(g, c, lag, z, times, opt, cfg));
}
BENCHMARK(BM_ActorStep);

void BM_Hungarian(benchmark::State& state) {
  const std::size_t n = state.range(0);
  SeededRng rng(4);
  const Matrix cost = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(assignment_min_cost(cost));
}
BENCHMARK(BM_Hungarian)->Arg(64)->Arg(256)->Arg(1024);

void BM_SymSqrt(benchmark::State& state) {
  const std::size_t d = state.range(0);
  SeededRng rng(5);
  const Matrix a = random_matrix(d, d, rng);
  Matrix m = matmul(a, transpose(a));
  for (std::size_t i = 0; i < d; ++i) m(i, i) += 1e-6;
  for (auto _ : state) benchmark::DoNotOptimize(sym_sqrt(m));
}
BENCHMARK(BM_SymSqrt)->Arg(2)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
