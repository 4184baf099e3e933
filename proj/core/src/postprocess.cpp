#include "orientdet/postprocess.hpp"

#include <algorithm>
#include <numeric>

#include "orientdet/error.hpp"

namespace orientdet {

std::vector<std::size_t> RankByScore(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

std::vector<Detection> SelectTopK(std::span<const Detection> dets, std::size_t k,
                                  double score_threshold) {
  std::vector<Detection> out;
  for (std::size_t i : RankByScore(dets)) {
    if (out.size() >= k) break;
    if (dets[i].score >= score_threshold) out.push_back(dets[i]);
  }
  return out;
}

std::vector<std::size_t> RotatedNmsIndices(std::span<const Detection> dets,
                                           const NmsOptions& options) {
  if (!(options.iou_threshold >= 0.0 && options.iou_threshold <= 1.0)) {
    throw Error("NMS IoU threshold must lie in [0, 1]");
  }
  std::vector<std::size_t> kept;
  for (std::size_t i : RankByScore(dets)) {
    bool suppressed = false;
    for (std::size_t j : kept) {
      if (options.per_class && dets[i].class_id != dets[j].class_id) continue;
      if (RotatedIoU(dets[i].box, dets[j].box) > options.iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<Detection> RotatedNms(std::span<const Detection> dets, const NmsOptions& options) {
  std::vector<Detection> out;
  for (std::size_t i : RotatedNmsIndices(dets, options)) out.push_back(dets[i]);
  return out;
}

}  // namespace orientdet
