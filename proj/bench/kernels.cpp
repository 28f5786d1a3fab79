#include <benchmark/benchmark.h>
#include <map>
#include <omp.h>

#include "pfl/energy.hpp"
#include "pfl/sim.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace pfl;

namespace {

const PhaseState& state_of(int n) {
  static std::map<int, PhaseState> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, testing::small_two_void(default_theta_star(), n)).first;
  return it->second;
}

void set_threads(benchmark::State& st) { omp_set_num_threads(static_cast<int>(st.range(1))); }

void BM_laplacian(benchmark::State& st) {
  set_threads(st);
  const ScalarField& f = state_of(static_cast<int>(st.range(0))).eta;
  for (auto _ : st) benchmark::DoNotOptimize(laplacian(f));
}

void BM_laplacian_serial_reference(benchmark::State& st) {
  const ScalarField& f = state_of(static_cast<int>(st.range(0))).eta;
  for (auto _ : st) benchmark::DoNotOptimize(reference::laplacian(f));
}

void BM_step(benchmark::State& st) {
  set_threads(st);
  const ModelParams p = default_theta_star();
  const PhaseState& s = state_of(static_cast<int>(st.range(0)));
  const double dt = 0.3 * stable_dt(p, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(step(s, p, dt));
}

void BM_step_serial_reference(benchmark::State& st) {
  const ModelParams p = default_theta_star();
  const PhaseState& s = state_of(static_cast<int>(st.range(0)));
  const double dt = 0.3 * stable_dt(p, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(reference::step(s, p, dt));
}

void BM_energy(benchmark::State& st) {
  set_threads(st);
  const ModelParams p = default_theta_star();
  const PhaseState& s = state_of(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(total_free_energy(s, p));
}

void BM_energy_serial_reference(benchmark::State& st) {
  const ModelParams p = default_theta_star();
  const PhaseState& s = state_of(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(reference::total_free_energy(s, p));
}

void parallel_args(benchmark::internal::Benchmark* b) {
  for (int n : {128, 512}) {
    for (int t : {1, 2, 4}) b->Args({n, t});
  }
}

void serial_args(benchmark::internal::Benchmark* b) {
  for (int n : {128, 512}) b->Args({n});
}

}  // namespace

BENCHMARK(BM_laplacian)->Apply(parallel_args)->UseRealTime();
BENCHMARK(BM_laplacian_serial_reference)->Apply(serial_args);
BENCHMARK(BM_step)->Apply(parallel_args)->UseRealTime();
BENCHMARK(BM_step_serial_reference)->Apply(serial_args);
BENCHMARK(BM_energy)->Apply(parallel_args)->UseRealTime();
BENCHMARK(BM_energy_serial_reference)->Apply(serial_args);

BENCHMARK_MAIN();
