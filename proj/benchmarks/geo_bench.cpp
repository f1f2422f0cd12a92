#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "fieldlog/geo.hpp"
#include "fieldlog/simulator.hpp"

namespace {

using namespace fieldlog;

std::vector<GeoPoint> random_ring(std::size_t n, std::mt19937_64& rng) {
  // Star-shaped polygon around (35, 137), radius 50-150 m.
  const geo::LocalFrame frame({35.0, 137.0});
  std::uniform_real_distribution<double> r(50, 150);
  std::vector<GeoPoint> ring;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2 * 3.14159265358979 * static_cast<double>(i) / static_cast<double>(n);
    const double rad = r(rng);
    ring.push_back(frame.to_geo({rad * std::cos(a), rad * std::sin(a)}));
  }
  return ring;
}

void BM_PointInPolygon(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto ring = random_ring(static_cast<std::size_t>(state.range(0)), rng);
  const geo::LocalFrame frame({35.0, 137.0});
  std::uniform_real_distribution<double> u(-160, 160);
  std::vector<GeoPoint> pts;
  for (int i = 0; i < 1024; ++i) pts.push_back(frame.to_geo({u(rng), u(rng)}));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(geo::point_in_polygon(pts[i++ & 1023], ring));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PointInPolygon)->Arg(4)->Arg(32)->Arg(256);

void BM_Haversine(benchmark::State& state) {
  GeoPoint a{35.0, 137.0}, b{35.001, 137.002};
  for (auto _ : state) {
    benchmark::DoNotOptimize(geo::haversine_m(a, b));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Haversine);

void BM_DigitizeBoundary(benchmark::State& state) {
  const geo::LocalFrame frame({35.0, 137.0});
  const double w = static_cast<double>(state.range(0));
  const FieldPolygon field{"F", "F",
                           {frame.to_geo({0, 0}), frame.to_geo({w, 0}), frame.to_geo({w, w / 2}), frame.to_geo({0, w / 2})},
                           0.0};
  const auto fixes = sim::boustrophedon_path(field, 5.0, 1.5, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(geo::digitize_boundary(fixes, 5.0, &field));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fixes.size()));
}
BENCHMARK(BM_DigitizeBoundary)->Arg(100)->Arg(400);

}  // namespace
