#include <benchmark/benchmark.h>

#include <random>

#include "fixtures.hpp"
#include "memflow/io.hpp"

using namespace memflow;
namespace mt = memflow::testing;

namespace {

void BM_Extract(benchmark::State& state) {
  const auto d = mt::output_tile_demo();
  for (auto _ : state) benchmark::DoNotOptimize(extract(d.mapping, d.spec));
}
BENCHMARK(BM_Extract);

void BM_EvaluateCost(benchmark::State& state) {
  const auto d = mt::output_tile_demo();
  const auto mac = mt::eyeriss_like().mac;
  const auto info = extract(d.mapping, d.spec);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_cost(d.mapping, d.spec, info, d.hierarchy, d.spatial, mac));
}
BENCHMARK(BM_EvaluateCost);

void BM_EnergyOnly(benchmark::State& state) {
  const auto d = mt::output_tile_demo();
  const auto mac = mt::eyeriss_like().mac;
  const auto info = extract(d.mapping, d.spec);
  for (auto _ : state) benchmark::DoNotOptimize(energy_only(d.mapping, d.spec, info, d.hierarchy, mac));
}
BENCHMARK(BM_EnergyOnly);

void BM_Simulate(benchmark::State& state) {
  std::mt19937_64 rng(9);
  mt::RandomCaseOptions o;
  o.max_macs = state.range(0);
  const auto rc = mt::random_case(rng, o);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(rc.mapping, rc.spec, rc.hierarchy, rc.spatial));
  state.counters["macs"] = static_cast<double>(rc.spec.total_macs());
}
BENCHMARK(BM_Simulate)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_GenerateSchemes(benchmark::State& state) {
  const auto a = mt::eyeriss_like();
  const auto spec = mt::alexnet_conv2();
  for (auto _ : state) {
    const auto b = generate_schemes(spec, a.hierarchy, a.spatial);
    state.counters["blockings"] = static_cast<double>(b.size());
  }
}
BENCHMARK(BM_GenerateSchemes)->Unit(benchmark::kMillisecond);

void BM_Search(benchmark::State& state) {
  const auto suite = mt::regression_suite();
  const auto& in = suite.at(4);
  SearchOptions o;
  o.strategy = static_cast<Strategy>(state.range(0));
  for (auto _ : state) {
    const auto r = search(in.spec, in.arch.hierarchy, in.arch.spatial, in.arch.mac, o);
    state.counters["evaluated"] = static_cast<double>(r.stats.evaluated);
  }
  state.SetLabel(std::string(to_string(o.strategy)) + " " + in.name);
}
BENCHMARK(BM_Search)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_EnumerateHierarchies(benchmark::State& state) {
  const auto pool = mt::desk_pool();
  const auto cfg = search_config_from_json(read_json_file(mt::data_path("search/desk_search.json")), pool);
  for (auto _ : state) {
    const auto hs = enumerate_hierarchies(cfg, cfg.unrollings.front());
    state.counters["hierarchies"] = static_cast<double>(hs.size());
  }
}
BENCHMARK(BM_EnumerateHierarchies)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
