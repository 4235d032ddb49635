#include <benchmark/benchmark.h>

#include "edarp/alns.hpp"
#include "edarp/greedy.hpp"
#include "edarp/policy.hpp"

using namespace edarp;

namespace {

Instance make(int n, std::uint64_t seed = 1) {
  GeneratorConfig g;
  g.requests = n;
  g.seed = seed;
  g.fleet.vehicles = 4;
  return generate_instance(g);
}

PolicyConfig bench_policy() {
  PolicyConfig cfg;
  cfg.d_h = 32;
  cfg.heads = 4;
  cfg.layers = 2;
  return cfg;
}

void BM_FeasibilityMask(benchmark::State& state) {
  const Instance inst = make(static_cast<int>(state.range(0)));
  const Environment env(inst);
  const FleetEpisodeState s = env.reset(false);
  for (auto _ : state) benchmark::DoNotOptimize(env.feasibility_mask(s));
}
BENCHMARK(BM_FeasibilityMask)->Arg(10)->Arg(20)->Arg(50);

void BM_GreedyEpisode(benchmark::State& state) {
  const Instance inst = make(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(greedy_solve(inst));
}
BENCHMARK(BM_GreedyEpisode)->Arg(10)->Arg(20)->Arg(50);

void BM_AlnsIterations(benchmark::State& state) {
  const Instance inst = make(static_cast<int>(state.range(0)));
  AlnsConfig cfg;
  cfg.max_iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(alns_solve(inst, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.max_iterations);
}
BENCHMARK(BM_AlnsIterations)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EncoderForward(benchmark::State& state) {
  const Policy p(bench_policy(), 1);
  const FeatureTensors f = normalize_features(make(static_cast<int>(state.range(0))));
  for (auto _ : state) {
    ad::Tape t(&p.params(), false);
    benchmark::DoNotOptimize(encode_nodes(t, p, f).value());
  }
}
BENCHMARK(BM_EncoderForward)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EncoderBackward(benchmark::State& state) {
  const Policy p(bench_policy(), 1);
  const FeatureTensors f = normalize_features(make(static_cast<int>(state.range(0))));
  for (auto _ : state) {
    ad::Tape t(&p.params());
    t.backward(ad::sum(encode_nodes(t, p, f)));
    ad::Gradients g = ad::Gradients::zeros_like(p.params());
    t.accumulate(g);
    benchmark::DoNotOptimize(g.global_norm());
  }
}
BENCHMARK(BM_EncoderBackward)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_PolicyRollout(benchmark::State& state) {
  const Policy p(bench_policy(), 1);
  const Instance inst = make(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rollout(p, inst, {}).solution.cost.reward);
}
BENCHMARK(BM_PolicyRollout)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
