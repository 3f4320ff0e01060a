#include <benchmark/benchmark.h>

#include <random>

#include "multidag/exhaustive_oracle.hpp"
#include "multidag/graph_core.hpp"
#include "multidag/group_lasso.hpp"
#include "multidag/joint_solver.hpp"
#include "multidag/sem_sim.hpp"

using namespace multidag;

namespace {

Matrix random_mask(int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  Matrix t(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) t(i, j) = i == j ? 0.0 : u(rng);
  return t;
}

TaskBundle bundle(int p, int k, int n) {
  FamilyConfig c;
  c.p = p;
  c.s = p + p / 4;
  c.num_tasks = k;
  c.n_identifiable = k;
  return sample_data(generate_family(c, 1), n, 2);
}

void BM_h_expm(benchmark::State& state) {
  const Matrix t = random_mask(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(acyclicity_with_gradient(t, AcyclicityVariant::Expm));
}
BENCHMARK(BM_h_expm)->Arg(8)->Arg(32)->Arg(64);

void BM_h_poly(benchmark::State& state) {
  const Matrix t = random_mask(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(acyclicity_with_gradient(t, AcyclicityVariant::Poly));
}
BENCHMARK(BM_h_poly)->Arg(8)->Arg(32)->Arg(64);

void BM_gradient_f(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  const TaskBundle b = bundle(p, k, 200);
  const Matrix t = random_mask(p, 4);
  const WeightStack g = WeightStack::zeros(k, p);
  const Hyperparams h;
  for (auto _ : state) benchmark::DoNotOptimize(gradient_f(g, t, 0.1, 0.1, b, h));
}
BENCHMARK(BM_gradient_f)->Args({32, 1})->Args({32, 8})->Args({32, 32});

void BM_fit_fixed_order(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  const TaskBundle b = bundle(p, k, 320);
  const double lambda = theory_lambda(p, 320, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(fit_fixed_order(b, Permutation::identity(p), lambda));
}
BENCHMARK(BM_fit_fixed_order)->Args({16, 4})->Args({32, 8})->Unit(benchmark::kMillisecond);

void BM_fit_joint(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  const TaskBundle b = bundle(p, k, 200);
  Hyperparams h;
  h.lambda = theory_lambda(p, 200, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(fit_joint(b, h));
}
BENCHMARK(BM_fit_joint)->Args({8, 2})->Args({16, 4})->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_fit_exhaustive(benchmark::State& state) {
  const TaskBundle b = bundle(static_cast<int>(state.range(0)), 2, 200);
  for (auto _ : state) benchmark::DoNotOptimize(fit_exhaustive(b, 0.05));
}
BENCHMARK(BM_fit_exhaustive)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
