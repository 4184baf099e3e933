#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "orientdet/geometry.hpp"

namespace orientdet {

struct Detection {
  OrientedBox box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Indices of `dets` sorted by descending score; equal scores keep their
// original order.
std::vector<std::size_t> RankByScore(std::span<const Detection> dets);

// Default score floors: ODM predictions drop very low scores, FAM
// predictions keep everything.
inline constexpr double kOdmScoreThreshold = 0.05;
inline constexpr double kFamScoreThreshold = 0.0;

// Detections with score >= score_threshold, best first, at most k of them.
std::vector<Detection> SelectTopK(std::span<const Detection> dets, std::size_t k = 2000,
                                  double score_threshold = kOdmScoreThreshold);

struct NmsOptions {
  double iou_threshold = 0.5;
  bool per_class = true;
};

// Greedy rotated NMS. A detection is dropped when it overlaps an already kept
// one (of the same class, if per_class) with IoU strictly above the
// threshold. Returns the kept indices in descending score order.
std::vector<std::size_t> RotatedNmsIndices(std::span<const Detection> dets,
                                           const NmsOptions& options = {});

std::vector<Detection> RotatedNms(std::span<const Detection> dets, const NmsOptions& options = {});

}  // namespace orientdet
