#include <benchmark/benchmark.h>

#include "fieldlog/attachment.hpp"
#include "fieldlog/segmentation.hpp"
#include "fieldlog/simulator.hpp"

namespace {

using namespace fieldlog;

void BM_EmitAcceptanceScenario(benchmark::State& state) {
  const auto scenario = sim::acceptance_scenario();
  for (auto _ : state) benchmark::DoNotOptimize(sim::emit_scenario(scenario));
}
BENCHMARK(BM_EmitAcceptanceScenario)->Unit(benchmark::kMillisecond);

void BM_RunPipelineAcceptance(benchmark::State& state) {
  const auto scenario = sim::acceptance_scenario();
  const auto registry = scenario.registry();
  const auto emitted = sim::emit_scenario(scenario);
  for (auto _ : state) benchmark::DoNotOptimize(segmentation::run_pipeline(registry, emitted.reports));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(emitted.reports.size()));
}
BENCHMARK(BM_RunPipelineAcceptance)->Unit(benchmark::kMillisecond);

void BM_InferAttachments(benchmark::State& state) {
  // One tractor, hours of 5 s scans of an attached and a stray beacon.
  const auto hours = state.range(0);
  const auto scenario = sim::acceptance_scenario();
  const auto registry = scenario.registry();
  std::vector<attachment::BeaconTimeline> tls;
  const auto* machine = &scenario.machines.front();
  for (const auto& m : scenario.machines) {
    if (m.cls == MachineClass::mpv) machine = &m;
  }
  for (int k = 0; k < 2; ++k) {
    const auto& implement = scenario.implements[static_cast<std::size_t>(k)];
    auto samples = sim::rssi_trace(k == 0, static_cast<double>(hours) * 3600.0, 42 + static_cast<std::uint64_t>(k));
    tls.push_back({machine->id, implement.beacon_uid, std::move(samples)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(attachment::infer_attachments(tls, registry, attachment::Thresholds{}));
  state.SetItemsProcessed(state.iterations() * hours * 3600);
}
BENCHMARK(BM_InferAttachments)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
