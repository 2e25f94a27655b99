#include <random>

#include <benchmark/benchmark.h>

#include "cpgflex/body.hpp"
#include "cpgflex/evolve.hpp"
#include "cpgflex/genome.hpp"
#include "cpgflex/neuro.hpp"
#include "cpgflex/rng.hpp"

using namespace cpgflex;

namespace {

genome::CpgDecoded sample_cpg() {
  std::mt19937_64 rng(7);
  return genome::decode_cpg(genome::random_genome(genome::Kind::Cpg, rng));
}

void network_step(benchmark::State& state) {
  const auto d = sample_cpg();
  neuro::Integrator integ(d.cpg, neuro::random_initial_state(d.cpg.size(), 1));
  const neuro::StepInput in{0.5, 0.0, {}};
  for (auto _ : state) {
    integ.step(in);
    benchmark::DoNotOptimize(integ.state().u.data());
  }
}
BENCHMARK(network_step);

void physics_step(benchmark::State& state) {
  const auto d = sample_cpg();
  const auto m = body::MorphologyParams::normal();
  auto s = body::initial_state(d.command, m);
  const auto targets = s.joints;
  for (auto _ : state) {
    s = body::physics_step(s, targets, m);
    benchmark::DoNotOptimize(s.position);
  }
}
BENCHMARK(physics_step);

void trial_10s(benchmark::State& state) {
  const auto d = sample_cpg();
  const auto sched = body::Schedule::constant(10.0, 0.5, 0.0);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto r = body::run_trial(d.cpg, d.command, body::MorphologyParams::normal(), sched, ++seed);
    benchmark::DoNotOptimize(r.metrics.h_tot);
  }
  state.SetLabel("10 s trial plus burn-in");
}
BENCHMARK(trial_10s)->Unit(benchmark::kMillisecond);

void nondominated_sort(benchmark::State& state) {
  Rng rng(3);
  std::vector<evolve::Fitness> pts(static_cast<std::size_t>(state.range(0)), evolve::Fitness(4));
  for (auto& p : pts)
    for (double& v : p) v = uniform01(rng);
  for (auto _ : state) benchmark::DoNotOptimize(evolve::nondominated_sort(pts));
}
BENCHMARK(nondominated_sort)->Arg(80)->Arg(336);

}  // namespace

BENCHMARK_MAIN();
