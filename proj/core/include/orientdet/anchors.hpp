#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "orientdet/featops.hpp"
#include "orientdet/geometry.hpp"

namespace orientdet {

struct PyramidLevel {
  std::string name;
  int stride = 8;
};

struct PyramidSpec {
  std::vector<PyramidLevel> levels;
  // Anchor side = scale_multiplier * stride.
  double scale_multiplier = 4.0;

  // P3..P7 with strides 8..128.
  static PyramidSpec Default();
  // Throws ShapeError unless strides are strictly increasing powers of two.
  void Validate() const;
};

struct GridSize {
  int height = 0;
  int width = 0;
};

// One square, axis-aligned anchor per location, centered on the cell:
// (S * (x + 0.5), S * (y + 0.5)) with side scale_multiplier * S.
std::vector<AnchorMap> GenerateAnchors(const PyramidSpec& spec, std::span<const GridSize> grid_sizes);

// Concatenates the levels in order, each row-major.
std::vector<OrientedBox> FlattenAnchors(std::span<const AnchorMap> levels);

struct AnchorLabel {
  enum class Kind { kNegative, kIgnore, kPositive };
  Kind kind = Kind::kNegative;
  int gt = -1;  // Matched ground-truth index for positives, else -1.

  bool positive() const { return kind == Kind::kPositive; }
  bool negative() const { return kind == Kind::kNegative; }
  bool ignored() const { return kind == Kind::kIgnore; }
  friend bool operator==(const AnchorLabel&, const AnchorLabel&) = default;
};

struct Assignment {
  std::vector<AnchorLabel> labels;
  std::vector<double> max_iou;  // Best rotated IoU of each anchor over all gts.

  std::size_t CountPositive() const;
  std::size_t CountNegative() const;
  std::size_t CountIgnore() const;
};

struct AssignOptions {
  double fg_threshold = 0.5;
  double bg_threshold = 0.4;
  // Each gt additionally claims its best anchor when that IoU is positive.
  bool low_quality_rescue = true;
};

// Max-IoU assignment with rotated IoU: positive at IoU >= fg (matched to the
// argmax gt, lowest index on ties), negative below bg, ignore in between.
// Rescue never takes an anchor away from a gt it already matched.
// Throws Error if fg < bg.
Assignment Assign(std::span<const OrientedBox> anchors, std::span<const OrientedBox> gts,
                  const AssignOptions& options = {});

}  // namespace orientdet
