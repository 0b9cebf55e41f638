#include <random>
#include <vector>

#include "benchmark/benchmark.h"
#include "boxforge/anchor_grid.h"
#include "boxforge/matcher.h"
#include "boxforge/multibox_loss.h"
#include "boxforge/postprocess.h"
#include "boxforge/voc_eval.h"

namespace boxforge {
namespace {

BBox RandomBox(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 0.8), s(0.02, 0.2);
  const double x = u(rng), y = u(rng);
  return {x, y, x + s(rng), y + s(rng)};
}

std::vector<GtObject> Objects(std::mt19937_64& rng, int n) {
  std::vector<GtObject> gts;
  for (int i = 0; i < n; ++i) gts.push_back({RandomBox(rng), i % 4, i});
  return gts;
}

void BM_GenerateAnchors(benchmark::State& state) {
  const DetectorSpec spec = CanonicalSpec();
  for (auto _ : state) benchmark::DoNotOptimize(GenerateAnchors(spec));
}
BENCHMARK(BM_GenerateAnchors);

void BM_MatchStandard(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const AnchorSet anchors = GenerateAnchors(CanonicalSpec());
  const auto gts = Objects(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(MatchStandard(gts, anchors, MatcherConfig{}));
}
BENCHMARK(BM_MatchStandard)->Arg(10)->Arg(50);

void BM_MatchForked(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const AnchorSet anchors = GenerateAnchors(CanonicalSpec());
  const auto gts = Objects(rng, static_cast<int>(state.range(0)));
  const ForkedAnchorSet forked{anchors, 4};
  for (auto _ : state) benchmark::DoNotOptimize(MatchForked(gts, forked, MatcherConfig{}));
}
BENCHMARK(BM_MatchForked)->Arg(10)->Arg(50);

void BM_LossFork(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const AnchorSet anchors = GenerateAnchors(CanonicalSpec());
  const auto gts = Objects(rng, 20);
  const MatchResult match = MatchForked(gts, ForkedAnchorSet{anchors, 4}, MatcherConfig{});
  PredictionSet pred = PredictionSet::Zeros(HeadMode::kFork, anchors.size(), 4);
  std::normal_distribution<double> n(0, 1);
  for (double& v : pred.conf) v = n(rng);
  for (double& v : pred.loc) v = n(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(LossFork(pred, match, gts, anchors, LossConfig{}));
  }
}
BENCHMARK(BM_LossFork);

void BM_Nms(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> score(0, 1);
  std::vector<Detection> dets;
  for (int i = 0; i < state.range(0); ++i) dets.push_back({RandomBox(rng), 0, score(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(Nms(dets, 0.45));
}
BENCHMARK(BM_Nms)->Arg(200)->Arg(2000);

void BM_AveragePrecision(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> score(0, 1);
  GroundTruthMap gts;
  std::vector<ScoredBox> dets;
  for (int p = 0; p < 100; ++p) {
    const PageKey key{"v", p};
    for (int i = 0; i < 10; ++i) {
      const BBox b = RandomBox(rng);
      gts[key].push_back(b);
      dets.push_back({key, b, score(rng)});
      dets.push_back({key, RandomBox(rng), score(rng)});
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(AveragePrecision(dets, gts, EvalConfig{}));
}
BENCHMARK(BM_AveragePrecision);

}  // namespace
}  // namespace boxforge

BENCHMARK_MAIN();
