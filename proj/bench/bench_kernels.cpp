// Serial (workers = 1) against OpenMP runs of the parallel kernels.
// Results are identical for every worker count; only the wall time changes.

#include "opsd/bnb.hpp"
#include "opsd/pforacle.hpp"
#include "opsd/scenario.hpp"

#include "feeders.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

using namespace opsd;

namespace {

const double kHalfWidth = 3.0 * std::numbers::pi / 180.0;

Network with_svc() {
  Network net = feeders::small_feeder(3, 0);
  feeders::add_svc(net, 0.3, 0.3);
  return net;
}

// exact power flow over 27 phase patterns x 27 SVC settings
void BM_EnumerateAssignments(benchmark::State& state) {
  const Network net = with_svc();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const auto r = enumerate_assignments(net, 0, StrategyFlags::from_number(4), 3, workers);
    benchmark::DoNotOptimize(r.objective);
  }
}

// one SOCP per binary pattern
void BM_EnumerateFixed(benchmark::State& state) {
  const Network net = with_svc();
  const auto m = build_subproblem(net, 0, StrategyFlags::from_number(4), network_fits(net, kHalfWidth));
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const auto r = enumerate_fixed(m, workers);
    benchmark::DoNotOptimize(r.objective);
  }
}

// node batches evaluated in parallel
void BM_BranchAndBound(benchmark::State& state) {
  const Network net = load_network(OPSD_SOURCE_DIR "/data/high-pv.json");
  const auto m = build_subproblem(net, 0, StrategyFlags::from_number(4), network_fits(net, kHalfWidth));
  BnbSettings s;
  s.workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const auto r = solve_misocp(m, s);
    benchmark::DoNotOptimize(r.objective);
    state.counters["nodes"] = static_cast<double>(r.nodes_explored);
  }
}

// windows solved in parallel
void BM_Windows(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.network_path = OPSD_SOURCE_DIR "/data/ieee13-like.json";
  cfg.strategy = 1;
  cfg.n_o = 6;
  cfg.workers = static_cast<int>(state.range(0));
  const Network net = prepare_network(cfg);
  for (auto _ : state) {
    const auto r = run_network(net, cfg);
    benchmark::DoNotOptimize(r.objective);
  }
}

}  // namespace

BENCHMARK(BM_EnumerateAssignments)->ArgName("workers")->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnumerateFixed)->ArgName("workers")->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BranchAndBound)->ArgName("workers")->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Windows)->ArgName("workers")->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
