#include <benchmark/benchmark.h>

#include "cwnd/exact.hpp"
#include "cwnd/optimize.hpp"

using namespace cwnd;

namespace {

Network bottleneck() {
  NetworkModel m;
  m.queues.push_back({"link", 1.0, Discipline::processor_sharing()});
  m.routes.push_back({"heavy", {"link"}, CongestionControl{AlphaFair(2.0, 4.0), 0.0, std::nullopt}});
  m.routes.push_back({"light", {"link"}, CongestionControl{AlphaFair(2.0, 1.0), 0.0, std::nullopt}});
  return Network(m);
}

Network triangle(int cap) {
  NetworkModel m;
  for (const char* id : {"a", "b", "c"}) m.queues.push_back({id, 1.0, Discipline::processor_sharing()});
  for (auto [id, from, to] : {std::tuple{"ab", "a", "b"}, {"bc", "b", "c"}, {"ca", "c", "a"}}) {
    m.routes.push_back({id, {from, to}, CongestionControl{AlphaFair(2.0, 1.0), 0.0, cap}});
  }
  return Network(m);
}

}  // namespace

static void BM_StationaryBottleneck(benchmark::State& state) {
  Network net = bottleneck();
  const int c = static_cast<int>(state.range(0));
  std::size_t states = 0;
  for (auto _ : state) {
    StationaryTable table = stationary_distribution(net, c);
    states = table.size();
    benchmark::DoNotOptimize(exact_throughput(net, table));
  }
  state.counters["states"] = static_cast<double>(states);
}
BENCHMARK(BM_StationaryBottleneck)->Arg(5)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

static void BM_StationaryTriangle(benchmark::State& state) {
  Network net = triangle(3);
  const int c = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(stationary_distribution(net, c).size());
}
BENCHMARK(BM_StationaryTriangle)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_SolveSystem(benchmark::State& state) {
  Network net = triangle(3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_system(net).allocation.rates);
}
BENCHMARK(BM_SolveSystem)->Unit(benchmark::kMicrosecond);
