#pragma once

// PASCAL-style evaluation of rotated detections.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "orientdet/geometry.hpp"

namespace orientdet {

struct GroundTruth {
  std::string image_id;
  OrientedBox box;
  bool difficult = false;
};

struct ScoredBox {
  std::string image_id;
  OrientedBox box;
  double score = 0.0;
};

enum class MatchKind { kTruePositive, kFalsePositive, kIgnored };

// Ranked matching outcome for one class at one IoU threshold.
struct PRCurve {
  std::vector<std::size_t> order;  // Detection indices, best score first.
  std::vector<MatchKind> kinds;    // Outcome of order[i].
  // Cumulative curve over the non-ignored detections, in rank order.
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t num_gt = 0;  // Non-difficult ground truths.
  std::size_t true_positives = 0;
};

// Each detection, in descending score order (ties: lower index first), takes
// the highest-IoU unmatched non-difficult gt of its image with IoU >= thr and
// becomes a true positive. Otherwise it is ignored if it reaches a difficult
// gt at that threshold, and a false positive if not.
PRCurve MatchDetections(std::span<const ScoredBox> dets, std::span<const GroundTruth> gts,
                        double iou_threshold = 0.5);

// Builds a curve from ranked TP/FP flags; used for hand-built cases.
PRCurve CurveFromFlags(std::span<const bool> ranked_is_tp, std::size_t num_gt);

enum class ApMetric { kVoc07, kVoc12 };

const char* MetricName(ApMetric metric);
// Accepts "voc07" / "voc12"; throws Error otherwise.
ApMetric ParseMetric(const std::string& name);

struct ApResult {
  double ap = 0.0;
  bool no_ground_truth = false;
};

// voc07: mean of the interpolated precision at recall 0, 0.1, ..., 1.
// voc12: area under the monotone precision envelope.
ApResult AveragePrecision(const PRCurve& curve, ApMetric metric);

// 0.50, 0.55, ..., 0.95.
std::vector<double> RangeThresholds();

struct ClassReport {
  std::string name;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::vector<ApResult> ap;  // One per threshold.
  bool excluded = false;     // No ground truth; left out of the mean.
};

struct EvalReport {
  ApMetric metric = ApMetric::kVoc12;
  std::vector<double> thresholds;
  std::vector<ClassReport> classes;
  std::vector<double> map;  // Unweighted class mean per threshold.
  double map_mean = 0.0;    // Mean of `map` over the thresholds.
  bool no_ground_truth = false;
};

using DetectionsByClass = std::map<std::string, std::vector<ScoredBox>>;
using GroundTruthByClass = std::map<std::string, std::vector<GroundTruth>>;

// Evaluates every class that appears in either map. Classes without
// non-difficult ground truth are reported but excluded from mAP; if none has
// any, every mAP is 0 and no_ground_truth is set. Classes are evaluated on up
// to `threads` workers; the result does not depend on the thread count.
EvalReport MapEval(const DetectionsByClass& dets, const GroundTruthByClass& gts,
                   std::span<const double> thresholds, ApMetric metric = ApMetric::kVoc12,
                   int threads = 1);

// Tab-separated table: one row per class, one AP column per threshold, then
// an "mAP" row.
std::string FormatTsv(const EvalReport& report);

// JSON document, schema:
//   {"metric": "voc07"|"voc12", "thresholds": [t...],
//    "classes": [{"name", "num_gt", "num_det", "excluded", "ap": [..]}],
//    "map": [..], "map_mean": x, "no_ground_truth": bool}
std::string FormatJson(const EvalReport& report);

}  // namespace orientdet
