#pragma once

// Large-image handling: tiling plans, chip/global coordinate mapping, merging
// of per-chip detections, a seeded stand-in detector for tests, and a forward
// pass through the alignment + orientation head built from the reference
// kernels.

#include <cstdint>
#include <span>
#include <vector>

#include "orientdet/boxcodec.hpp"
#include "orientdet/featops.hpp"
#include "orientdet/orientation.hpp"
#include "orientdet/postprocess.hpp"

namespace orientdet {

struct Window {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  bool ContainsPoint(double x, double y) const {
    return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
  }
  friend bool operator==(const Window&, const Window&) = default;
};

struct TilePlan {
  int image_width = 0;
  int image_height = 0;
  int chip = 1024;
  int stride = 824;
  std::vector<Window> windows;  // Row-major: y0 outer, x0 inner.
};

// Origins at multiples of stride along each axis; the last origin is clamped
// to max(0, dim - chip). Windows are min(chip, dim) wide. Throws Error for
// non-positive dimensions, chip < 1, or stride outside [1, chip].
TilePlan PlanTiles(int image_width, int image_height, int chip = 1024, int stride = 824);

// Origins used along one axis of PlanTiles.
std::vector<int> TileOrigins(int dim, int chip, int stride);

Detection ChipToGlobal(const Detection& det, const Window& window);
Detection GlobalToChip(const Detection& det, const Window& window);

struct ChipDetections {
  Window window;
  std::vector<Detection> detections;  // Chip-local coordinates.
};

inline constexpr double kDefaultMergeIoU = 0.1;

// Orders detections by descending score, then class and box fields, so the
// result does not depend on input order.
void SortCanonical(std::vector<Detection>& dets);

// Maps every chip to global coordinates, then runs per-class rotated NMS.
std::vector<Detection> MergeDetections(std::span<const ChipDetections> chips,
                                       double nms_threshold = kDefaultMergeIoU);

struct LabeledBox {
  OrientedBox box;
  int class_id = 0;
};

// Bounded uniform noise amplitudes for the simulated detector.
struct JitterSpec {
  double center = 0.0;  // Pixels, per axis.
  double side = 0.0;    // Relative, w and h scale by (1 + u * side).
  double angle = 0.0;   // Radians.
  // Score = 1 - score_decay * mean |u| over the perturbed components.
  double score_decay = 0.5;

  bool zero() const { return center == 0.0 && side == 0.0 && angle == 0.0; }
};

// Stand-in detector: every gt whose center lies in the window is reported in
// chip-local coordinates, perturbed by `jitter`. Deterministic for a seed.
std::vector<Detection> SimulateChipDetections(std::span<const LabeledBox> gts, const Window& window,
                                              const JitterSpec& jitter, std::uint64_t seed);

// Whole-image mode: one window covering the full image.
std::vector<Detection> SimulateWholeImage(std::span<const LabeledBox> gts, int image_width,
                                          int image_height, const JitterSpec& jitter,
                                          std::uint64_t seed);

// Tiles the image, simulates each chip (seed + window index) and merges.
std::vector<Detection> SimulateTiled(std::span<const LabeledBox> gts, const TilePlan& plan,
                                     const JitterSpec& jitter, std::uint64_t seed,
                                     double nms_threshold = kDefaultMergeIoU);

struct HeadConfig {
  int channels = 256;
  int fam_depth = 2;
  int odm_depth = 2;
  int orientations = 8;
  int num_classes = 15;
  int kernel_size = 3;

  // Throws ShapeError on an inconsistent configuration.
  void Validate() const;
};

// Weights of the detection head. Towers are 3x3 convolutions followed by
// ReLU; outputs are linear (regression) or sigmoid (classification).
struct HeadWeights {
  std::vector<ConvKernel> fam_reg_tower;
  ConvKernel fam_reg_out;  // channels -> 5
  std::vector<ConvKernel> fam_cls_tower;
  ConvKernel fam_cls_out;  // channels -> num_classes
  ConvKernel align;        // channels -> channels, alignment convolution
  RotatingFilter arf;      // channels/N -> channels/N base channels
  std::vector<ConvKernel> odm_cls_tower;  // first layer takes channels/N
  ConvKernel odm_cls_out;
  std::vector<ConvKernel> odm_reg_tower;
  ConvKernel odm_reg_out;

  // He-style uniform weights from a seeded generator. The regression outputs
  // are scaled by `delta_scale` so refined anchors stay near their priors.
  static HeadWeights Random(const HeadConfig& config, std::uint64_t seed,
                            double delta_scale = 0.05);
};

struct HeadLevelOutput {
  FeatureGrid fam_deltas;       // H x W x 5
  AnchorMap refined_anchors;    // Decoded FAM deltas.
  OffsetField offsets;          // 2k^2 per location.
  FeatureGrid aligned;          // Alignment convolution output.
  OrientedFeatureGrid oriented; // ARF output, orientation-sensitive.
  FeatureGrid pooled;           // Orientation-invariant, channels / N.
  FeatureGrid fam_scores;       // Empty unless keep_fam_classification.
  FeatureGrid odm_scores;       // H x W x num_classes, sigmoid.
  FeatureGrid odm_deltas;       // H x W x 5
  std::vector<Detection> candidates;  // One per location: argmax class.
  // Refined anchors scored by the FAM classifier; only with
  // keep_fam_classification.
  std::vector<Detection> fam_candidates;
};

struct HeadOptions {
  // The FAM classification branch is only needed when FAM output is used
  // for predictions.
  bool keep_fam_classification = false;
  DecodeOptions decode;
};

// Runs FAM (anchor refinement + alignment convolution) and ODM (ARF,
// orientation pooling, classification and regression) on every level.
// Throws ShapeError when features, anchors or weights disagree.
std::vector<HeadLevelOutput> HeadForward(std::span<const FeatureGrid> features,
                                         const HeadConfig& config, const HeadWeights& weights,
                                         std::span<const AnchorMap> anchors,
                                         const HeadOptions& options = {});

}  // namespace orientdet
