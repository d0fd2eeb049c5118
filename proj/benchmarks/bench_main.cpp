#include <benchmark/benchmark.h>

#include <random>

#include "pandora/pipeline.hpp"

using namespace pandora;

namespace {

Graph random_graph(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  return Graph::from_edges(n, edges);
}

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(r, c);
  for (double& x : m.data()) x = u(rng);
  return m;
}

void BM_CountNmd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = random_graph(n, 12.0 / static_cast<double>(n), 1);
  for (auto _ : state) benchmark::DoNotOptimize(count_nmd(g));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CountNmd)->RangeMultiplier(2)->Range(250, 4000)->Complexity();

void BM_Propagation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PropagationOperator p(renormalized_propagation(random_graph(n, 10.0 / static_cast<double>(n), 2)));
  const auto h = random_matrix(n, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(p.apply(h));
}
BENCHMARK(BM_Propagation)->Arg(500)->Arg(1000)->Arg(2000);

void BM_TrainEpoch(benchmark::State& state) {
  SynthConfig sc;
  sc.n = static_cast<std::size_t>(state.range(0));
  sc.seed = 4;
  const auto data = synth_dataset(sc).dataset;
  RunConfig rc;
  rc.max_epoch = 1;
  const auto split = split_dataset(data.label_indices(), rc.ratios, rc.seed);
  const auto schemes = fit_schemes(data, split.train, false, {});
  const auto f = featurize(data, schemes, false);
  const auto labels = data.label_indices();
  TrainConfig tc;
  tc.max_epoch = 1;
  for (auto _ : state) {
    PandoraModel m(model_config_for(rc, f));
    benchmark::DoNotOptimize(train(m, {f.steps, labels, split.train, split.validation}, tc));
  }
}
BENCHMARK(BM_TrainEpoch)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
