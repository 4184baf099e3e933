#include "orientdet/anchors.hpp"

#include <algorithm>

#include "orientdet/error.hpp"

namespace orientdet {

PyramidSpec PyramidSpec::Default() {
  return {{{"P3", 8}, {"P4", 16}, {"P5", 32}, {"P6", 64}, {"P7", 128}}, 4.0};
}

void PyramidSpec::Validate() const {
  if (!(scale_multiplier > 0.0)) throw ShapeError("anchor scale multiplier must be positive");
  int previous = 0;
  for (const PyramidLevel& level : levels) {
    const int s = level.stride;
    if (s <= 0 || (s & (s - 1)) != 0) {
      throw ShapeError("level " + level.name + " stride " + std::to_string(s) +
                       " is not a power of two");
    }
    if (s <= previous) throw ShapeError("pyramid strides must be strictly increasing");
    previous = s;
  }
}

std::vector<AnchorMap> GenerateAnchors(const PyramidSpec& spec,
                                       std::span<const GridSize> grid_sizes) {
  spec.Validate();
  if (grid_sizes.size() != spec.levels.size()) {
    throw ShapeError("expected " + std::to_string(spec.levels.size()) + " grid sizes, got " +
                     std::to_string(grid_sizes.size()));
  }
  std::vector<AnchorMap> maps;
  maps.reserve(spec.levels.size());
  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    const int stride = spec.levels[l].stride;
    const double side = spec.scale_multiplier * stride;
    AnchorMap map(grid_sizes[l].height, grid_sizes[l].width, stride);
    for (int y = 0; y < map.height(); ++y) {
      for (int x = 0; x < map.width(); ++x) {
        map.at(y, x) = {stride * (x + 0.5), stride * (y + 0.5), side, side, 0.0};
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

std::vector<OrientedBox> FlattenAnchors(std::span<const AnchorMap> levels) {
  std::vector<OrientedBox> flat;
  for (const AnchorMap& m : levels) flat.insert(flat.end(), m.boxes().begin(), m.boxes().end());
  return flat;
}

std::size_t Assignment::CountPositive() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const AnchorLabel& l) { return l.positive(); }));
}

std::size_t Assignment::CountNegative() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const AnchorLabel& l) { return l.negative(); }));
}

std::size_t Assignment::CountIgnore() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const AnchorLabel& l) { return l.ignored(); }));
}

Assignment Assign(std::span<const OrientedBox> anchors, std::span<const OrientedBox> gts,
                  const AssignOptions& options) {
  if (options.fg_threshold < options.bg_threshold) {
    throw Error("foreground threshold must not be below the background threshold");
  }
  Assignment out;
  out.labels.resize(anchors.size());
  out.max_iou.assign(anchors.size(), 0.0);
  if (anchors.empty() || gts.empty()) return out;

  const std::size_t n_gt = gts.size();
  std::vector<double> gt_best_iou(n_gt, 0.0);
  std::vector<std::size_t> gt_best_anchor(n_gt, anchors.size());

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < n_gt; ++g) {
      const double iou = RotatedIoU(anchors[a], gts[g]);
      // Strict comparisons keep the lowest index on ties.
      if (iou > best) {
        best = iou;
        best_gt = static_cast<int>(g);
      }
      if (iou > gt_best_iou[g]) {
        gt_best_iou[g] = iou;
        gt_best_anchor[g] = a;
      }
    }
    out.max_iou[a] = best;
    AnchorLabel& label = out.labels[a];
    if (best_gt >= 0 && best >= options.fg_threshold) {
      label = {AnchorLabel::Kind::kPositive, best_gt};
    } else if (best < options.bg_threshold) {
      label = {AnchorLabel::Kind::kNegative, -1};
    } else {
      label = {AnchorLabel::Kind::kIgnore, -1};
    }
  }

  if (options.low_quality_rescue) {
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (gt_best_anchor[g] == anchors.size()) continue;  // Overlaps nothing.
      AnchorLabel& label = out.labels[gt_best_anchor[g]];
      if (label.positive()) continue;
      label = {AnchorLabel::Kind::kPositive, static_cast<int>(g)};
    }
  }
  return out;
}

}  // namespace orientdet
