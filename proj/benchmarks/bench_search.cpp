#include <benchmark/benchmark.h>

#include "shrinknas/architecture.hpp"
#include "shrinknas/cost.hpp"
#include "shrinknas/datasets.hpp"
#include "shrinknas/evaluators.hpp"
#include "shrinknas/shrink.hpp"
#include "shrinknas/topology.hpp"

using namespace shrinknas;

namespace {

void BM_MapToBlock(benchmark::State& state) {
  const CellTopology g = complete_dag(static_cast<int>(state.range(0)), CellKind::Cnn, 1);
  for (auto _ : state) benchmark::DoNotOptimize(map_to_block(g));
}
BENCHMARK(BM_MapToBlock)->Arg(8)->Arg(15)->Arg(32);

void BM_CellCost(benchmark::State& state) {
  const CellTopology g = complete_dag(static_cast<int>(state.range(0)), CellKind::Cnn, 1);
  const MappedBlock block = map_to_block(g);
  for (auto _ : state) benchmark::DoNotOptimize(cnn_cell_cost(block, g, CnnShape{}));
}
BENCHMARK(BM_CellCost)->Arg(8)->Arg(15);

void BM_ArchitectureCost(benchmark::State& state) {
  const CellTopology g = complete_dag(8, CellKind::Cnn, 1);
  ResourceModel model;
  model.scope = ResourceScope::Architecture;
  for (auto _ : state) benchmark::DoNotOptimize(model.report(g));
}
BENCHMARK(BM_ArchitectureCost);

void BM_SurrogateShrink(benchmark::State& state) {
  SearchConfig c = SearchConfig::defaults_for(CellKind::Cnn);
  c.n = static_cast<int>(state.range(0));
  c.k = static_cast<int>(state.range(1));
  const SurrogateEvaluator ev;
  for (auto _ : state) benchmark::DoNotOptimize(run_shrink(c, ev));
}
BENCHMARK(BM_SurrogateShrink)->Args({8, 10})->Args({8, 28})->Args({12, 10})->Unit(benchmark::kMillisecond);

// One epoch over a small blob set, so roughly the cost of a candidate epoch.
void BM_TrainEpoch(benchmark::State& state) {
  DatasetDescriptor d;
  d.train_size = 64;
  d.validation_size = 32;
  const ProxyDataset data = generate_dataset(d);
  const CellTopology g = complete_dag(static_cast<int>(state.range(0)), CellKind::Cnn, 2);
  for (auto _ : state) benchmark::DoNotOptimize(train_eval(g, data, 1, 0));
}
BENCHMARK(BM_TrainEpoch)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_RnnEpoch(benchmark::State& state) {
  DatasetDescriptor d;
  d.kind = DatasetKind::RepeatingTokens;
  d.train_size = 200;
  d.validation_size = 100;
  const ProxyDataset data = generate_dataset(d);
  const CellTopology g = complete_dag(3, CellKind::Rnn, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(train_eval(g, data, 1, 0, TrainerConfig::defaults_for(CellKind::Rnn)));
}
BENCHMARK(BM_RnnEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
