#include <random>

#include <benchmark/benchmark.h>

#include "cspt/experiment.hpp"
#include "cspt/linprog.hpp"
#include "cspt/replica.hpp"

using namespace cspt;

namespace {

const QuadratureRule& rule() {
  static const QuadratureRule r = gauss_hermite();
  return r;
}

void BM_BasisPursuit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ProblemInstance inst = make_instance(static_cast<int>(0.8 * n), n, 0.5, EnsembleKind{}, 1234);
  const EqualityConstrainedL1Problem pr{inst.matrix, inst.measurement};
  for (auto _ : state) benchmark::DoNotOptimize(solve_basis_pursuit(pr));
  state.SetComplexityN(n);
}
BENCHMARK(BM_BasisPursuit)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_SaddleL1(benchmark::State& state) {
  const ModelParams p{state.range(0) / 100.0, 0.5, Norm::L1};
  for (auto _ : state) benchmark::DoNotOptimize(solve_saddle(p, default_init(p), rule()));
}
BENCHMARK(BM_SaddleL1)->Arg(50)->Arg(70)->Arg(80);

void BM_CriticalRate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(l1_alpha_c(0.5));
}
BENCHMARK(BM_CriticalRate);

void BM_SiteAverages(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(site_averages(0.8, 2.0, Norm::L1, rule()));
}
BENCHMARK(BM_SiteAverages);

void BM_GaussHermite(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(gauss_hermite(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_GaussHermite)->Arg(32)->Arg(128);

void BM_Trial(benchmark::State& state) {
  std::uint64_t s = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_trial(static_cast<int>(state.range(0)), 0.5, EnsembleKind{}, {}, derive_seed(3, 0, s++)));
}
BENCHMARK(BM_Trial)->Arg(20)->Arg(30);

}  // namespace
BENCHMARK_MAIN();
