#include <benchmark/benchmark.h>

#include "cwnd/simulate.hpp"

using namespace cwnd;

static void BM_SimulateTriangle(benchmark::State& state) {
  NetworkModel m;
  for (const char* id : {"a", "b", "c"}) m.queues.push_back({id, 1.0, Discipline::fifo()});
  m.routes.push_back({"ab", {"a", "b"}, CongestionControl{AlphaFair(2.0, 1.0), 0.0, 2}});
  m.routes.push_back({"bc", {"b", "c"}, CongestionControl{AlphaFair(2.0, 1.0), 0.0, 2}});
  m.routes.push_back({"ca", {"c", "a"}, CongestionControl{AlphaFair(2.0, 1.0), 0.0, 2}});
  Network net(m);
  SimConfig cfg;
  cfg.c = static_cast<int>(state.range(0));
  cfg.measure_time = 2000;
  cfg.threads = 1;
  std::uint64_t events = 0;
  for (auto _ : state) {
    SimStats st = simulate(net, cfg);
    events += st.replications[0].events;
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SimulateTriangle)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
