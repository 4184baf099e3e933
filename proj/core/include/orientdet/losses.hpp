#pragma once

#include <cstddef>
#include <span>

#include "orientdet/anchors.hpp"
#include "orientdet/boxcodec.hpp"
#include "orientdet/geometry.hpp"

namespace orientdet {

// Sigmoid focal loss for one class score. p is clamped to
// [1e-12, 1 - 1e-12]. A negative alpha disables the alpha weighting.
double FocalLoss(double p, bool is_positive, double alpha = 0.25, double gamma = 2.0);

// Sum over the five components of the smooth-L1 penalty.
double SmoothL1(const BoxDelta& pred, const BoxDelta& target, double beta = 1.0 / 9.0);

// Pairwise (cascade) summation; the result depends only on the order of
// `values`, never on threading.
double PairwiseSum(std::span<const double> values);

// Predictions and labels of one head stage (FAM or ODM) for a set of anchors.
struct StageBatch {
  int num_classes = 1;
  std::span<const double> class_probs;  // anchors x num_classes, row-major.
  std::span<const BoxDelta> deltas;     // Predicted regression per anchor.
  std::span<const OrientedBox> anchors;
  const Assignment* assignment = nullptr;
  std::span<const OrientedBox> gt_boxes;
  std::span<const int> gt_labels;  // Class id of every gt in [0, num_classes).

  std::size_t size() const { return anchors.size(); }
};

struct LossOptions {
  double lambda = 1.0;
  double alpha = 0.25;
  double gamma = 2.0;
  double beta = 1.0 / 9.0;
};

struct StageLoss {
  double cls = 0.0;  // Focal loss summed over non-ignored anchors and classes.
  double reg = 0.0;  // Smooth-L1 summed over positives.
  std::size_t positives = 0;
};

struct LossBreakdown {
  double fam_cls = 0.0;
  double fam_reg = 0.0;
  double odm_cls = 0.0;
  double odm_reg = 0.0;
  double total = 0.0;
  std::size_t n_fam_pos = 0;
  std::size_t n_odm_pos = 0;
  // Normalizers actually used: positive counts floored at 1.
  double fam_normalizer = 1.0;
  double odm_normalizer = 1.0;
  // Both stages were empty; every term is zero.
  bool empty = false;
};

// Throws ShapeError when the batch arrays disagree in length.
StageLoss EvaluateStage(const StageBatch& batch, const LossOptions& options = {});

// total = (fam_cls + fam_reg) / N_F + lambda * (odm_cls + odm_reg) / N_O.
// Regression targets are Encode(matched gt, anchor).
LossBreakdown MultitaskLoss(const StageBatch& fam, const StageBatch& odm,
                            const LossOptions& options = {});

}  // namespace orientdet
