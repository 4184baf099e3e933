#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "orientdet/error.hpp"
#include "orientdet/postprocess.hpp"

namespace {

using namespace orientdet;

std::vector<Detection> RandomScene(std::mt19937_64& rng, int max_boxes, int classes) {
  std::uniform_int_distribution<int> count(0, max_boxes), cls(0, classes - 1);
  std::uniform_real_distribution<double> score(0, 1);
  std::uniform_int_distribution<int> coarse(0, 9);
  const int n = count(rng);
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    // Coarse scores create ties; a small field creates overlaps.
    const double s = coarse(rng) < 3 ? 0.5 : score(rng);
    dets.push_back({oracle::RandomBox(rng, 60.0, 30.0), cls(rng), s});
  }
  return dets;
}

TEST(RankByScore, StableDescending) {
  const std::vector<Detection> d = {{{}, 0, 0.5}, {{}, 0, 0.9}, {{}, 0, 0.5}, {{}, 0, 0.1}};
  EXPECT_EQ(RankByScore(d), (std::vector<std::size_t>{1, 0, 2, 3}));
}

TEST(SelectTopK, ThresholdAndLimit) {
  std::vector<Detection> d;
  for (int i = 0; i < 10; ++i) d.push_back({{}, 0, i / 10.0});
  const auto top = SelectTopK(d, 3, 0.05);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].score, 0.9);
  EXPECT_EQ(top[2].score, 0.7);
  EXPECT_EQ(SelectTopK(d, 100, 0.05).size(), 9u);
  EXPECT_EQ(SelectTopK(d, 100, 0.0).size(), 10u);
}

TEST(RotatedNms, DisjointSetUnchanged) {
  std::vector<Detection> d;
  for (int i = 0; i < 5; ++i) d.push_back({{i * 100.0, 0, 10, 5, 0.3}, 0, 0.1 * i});
  const auto kept = RotatedNms(d);
  EXPECT_EQ(kept.size(), 5u);
  EXPECT_EQ(kept.front().score, 0.4);
}

TEST(RotatedNms, DuplicateCollapsedPerClass) {
  const OrientedBox b{10, 10, 20, 8, 0.4};
  const std::vector<Detection> d = {{b, 0, 0.6}, {b, 0, 0.9}, {b, 1, 0.5}};
  const auto kept = RotatedNms(d);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].score, 0.9);
  EXPECT_EQ(kept[1].class_id, 1);
  EXPECT_EQ(RotatedNms(d, {0.5, false}).size(), 1u);
}

TEST(RotatedNms, ThresholdIsStrict) {
  // IoU exactly 0.5: kept at threshold 0.5, suppressed just below.
  const std::vector<Detection> d = {{{5, 5, 10, 10, 0}, 0, 0.9}, {{5, 2.5, 10, 5, 0}, 0, 0.8}};
  EXPECT_EQ(RotatedNms(d, {0.5, true}).size(), 2u);
  EXPECT_EQ(RotatedNms(d, {0.49, true}).size(), 1u);
}

TEST(RotatedNms, InvalidThresholdThrows) {
  EXPECT_THROW(RotatedNmsIndices({}, {1.5, true}), Error);
  EXPECT_THROW(RotatedNmsIndices({}, {-0.1, true}), Error);
  EXPECT_TRUE(RotatedNmsIndices({}, {0.5, true}).empty());
}

TEST(RotatedNms, MatchesBruteForceReference) {
  std::mt19937_64 rng(61);
  for (int scene = 0; scene < 200; ++scene) {
    const auto dets = RandomScene(rng, 50, 3);
    for (double thr : {0.1, 0.3, 0.5, 0.7}) {
      for (bool per_class : {true, false}) {
        ASSERT_EQ(RotatedNmsIndices(dets, {thr, per_class}), oracle::BruteForceNms(dets, thr, per_class));
      }
    }
  }
}

TEST(RotatedNms, KeptSetIsPairwiseSeparated) {
  std::mt19937_64 rng(62);
  for (int scene = 0; scene < 50; ++scene) {
    const auto kept = RotatedNms(RandomScene(rng, 50, 1), {0.3, true});
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) ASSERT_LE(RotatedIoU(kept[i].box, kept[j].box), 0.3);
    }
  }
}

TEST(RotatedNms, RaisingThresholdCanReduceSurvivors) {
  // Greedy NMS is not monotone in the threshold: at 0.5, A removes B, which
  // frees C1 and C2; at 0.65, B survives and removes both.
  const std::vector<Detection> d = {{{0, 0, 10, 10, 0}, 0, 0.9},
                                    {{2.5, 0, 10, 10, 0}, 0, 0.8},
                                    {{2.5, 2, 10, 10, 0}, 0, 0.7},
                                    {{2.5, -2, 10, 10, 0}, 0, 0.6}};
  EXPECT_NEAR(RotatedIoU(d[0].box, d[1].box), 0.6, 1e-12);
  EXPECT_EQ(RotatedNms(d, {0.5, true}).size(), 3u);
  EXPECT_EQ(RotatedNms(d, {0.65, true}).size(), 2u);
}

}  // namespace
