#include <benchmark/benchmark.h>

#include "geobalance/kernels.hpp"
#include "test_support.hpp"

namespace {

using geobalance::Instance;
using geobalance::OriginAssignment;
using geobalance::Rng;

Instance bench_instance(std::size_t m) {
  Rng rng(2024, m);
  return geobalance::testing::random_instance(rng, m);
}

OriginAssignment bench_state(const Instance& inst) {
  Rng rng(7, inst.size());
  return geobalance::testing::random_assignment(inst, rng);
}

void BM_DeltaSerial(benchmark::State& state) {
  const Instance inst = bench_instance(static_cast<std::size_t>(state.range(0)));
  const auto loads = bench_state(inst).loads;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geobalance::kernels::delta_matrix_serial(inst, loads));
  }
}

void BM_DeltaParallel(benchmark::State& state) {
  const Instance inst = bench_instance(static_cast<std::size_t>(state.range(0)));
  const auto loads = bench_state(inst).loads;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geobalance::kernels::delta_matrix(inst, loads));
  }
}

void BM_PairImprovementsSerial(benchmark::State& state) {
  const Instance inst = bench_instance(static_cast<std::size_t>(state.range(0)));
  const OriginAssignment oa = bench_state(inst);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        geobalance::kernels::pair_improvements_serial(inst, oa, 1e-10));
  }
}

void BM_PairImprovementsParallel(benchmark::State& state) {
  const Instance inst = bench_instance(static_cast<std::size_t>(state.range(0)));
  const OriginAssignment oa = bench_state(inst);
  for (auto _ : state) {
    benchmark::DoNotOptimize(geobalance::kernels::pair_improvements(inst, oa, 1e-10));
  }
}

BENCHMARK(BM_DeltaSerial)->RangeMultiplier(2)->Range(8, 128);
BENCHMARK(BM_DeltaParallel)->RangeMultiplier(2)->Range(8, 128);
BENCHMARK(BM_PairImprovementsSerial)->RangeMultiplier(2)->Range(4, 32);
BENCHMARK(BM_PairImprovementsParallel)->RangeMultiplier(2)->Range(4, 32);

}  // namespace

BENCHMARK_MAIN();
