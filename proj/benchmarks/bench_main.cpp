#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "orientdet/featops.hpp"
#include "orientdet/geometry.hpp"
#include "orientdet/pipeline.hpp"
#include "orientdet/postprocess.hpp"

namespace {

using namespace orientdet;

std::vector<OrientedBox> RandomBoxes(std::size_t n, double extent, double max_side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0, extent), side(4, max_side), ang(-3.2, 3.2);
  std::vector<OrientedBox> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Canonicalize({pos(rng), pos(rng), side(rng), side(rng), ang(rng)}));
  return out;
}

void BM_RotatedIoU(benchmark::State& state) {
  const auto a = RandomBoxes(1024, 100, 50, 1);
  const auto b = RandomBoxes(1024, 100, 50, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(RotatedIoU(a[i & 1023], b[i & 1023]));
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RotatedIoU);

void BM_RotatedNms(benchmark::State& state) {
  const auto boxes = RandomBoxes(state.range(0), 1000, 80, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> score(0, 1);
  std::vector<Detection> dets;
  for (const auto& b : boxes) dets.push_back({b, 0, score(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(RotatedNms(dets));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RotatedNms)->Arg(200)->Arg(2000);

FeatureGrid RandomGrid(int h, int w, int c, int stride) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  FeatureGrid g(h, w, c, stride);
  for (double& v : g.values()) v = u(rng);
  return g;
}

void BM_AlignConv(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0)), channels = static_cast<int>(state.range(1));
  const FeatureGrid g = RandomGrid(size, size, channels, 8);
  ConvKernel k(channels, channels, 3);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : k.weights()) v = u(rng);
  AnchorMap anchors = IdentityAnchorMap(size, size, 3, 8);
  for (OrientedBox& b : anchors.boxes()) b.theta = 0.3;
  const OffsetField off = ComputeOffsetField(anchors, 3, 8);
  for (auto _ : state) benchmark::DoNotOptimize(AlignConv(g, k, off));
}
BENCHMARK(BM_AlignConv)->Args({32, 16})->Args({64, 32})->Unit(benchmark::kMillisecond);

void BM_Conv2dRef(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0)), channels = static_cast<int>(state.range(1));
  const FeatureGrid g = RandomGrid(size, size, channels, 8);
  ConvKernel k(channels, channels, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Conv2dRef(g, k));
}
BENCHMARK(BM_Conv2dRef)->Args({32, 16})->Args({64, 32})->Unit(benchmark::kMillisecond);

// Whole pipeline on a 4000x4000 scene: 824 is the single-scale stride, 512
// the denser multi-scale one.
void BM_TileAndMerge(benchmark::State& state) {
  const int stride = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(0, 4000), side(8, 60), ang(-0.78, 2.35);
  std::vector<LabeledBox> gts;
  for (int i = 0; i < 2000; ++i) gts.push_back({Canonicalize({pos(rng), pos(rng), side(rng), side(rng), ang(rng)}), i % 15});
  const TilePlan plan = PlanTiles(4000, 4000, 1024, stride);
  const JitterSpec jitter{1.0, 0.05, 0.02, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(SimulateTiled(gts, plan, jitter, 11));
  state.counters["windows"] = static_cast<double>(plan.windows.size());
}
BENCHMARK(BM_TileAndMerge)->Arg(824)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
