#include "orientdet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "orientdet/error.hpp"

namespace orientdet {

namespace {

constexpr double kProbClamp = 1e-12;

double SmoothL1Term(double d, double beta) {
  const double a = std::abs(d);
  if (beta <= 0.0) return a;
  return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
}

void CheckBatch(const StageBatch& b) {
  const std::size_t n = b.anchors.size();
  if (b.num_classes <= 0) throw ShapeError("stage needs at least one class");
  if (b.class_probs.size() != n * static_cast<std::size_t>(b.num_classes)) {
    throw ShapeError("class probabilities do not match anchors x classes");
  }
  if (b.deltas.size() != n) throw ShapeError("one regression delta per anchor required");
  if (n == 0) return;
  if (b.assignment == nullptr || b.assignment->labels.size() != n) {
    throw ShapeError("assignment does not match the anchor count");
  }
  if (b.gt_labels.size() != b.gt_boxes.size()) {
    throw ShapeError("every ground-truth box needs a class label");
  }
  for (const AnchorLabel& l : b.assignment->labels) {
    if (l.positive() && (l.gt < 0 || static_cast<std::size_t>(l.gt) >= b.gt_boxes.size())) {
      throw ShapeError("assignment references ground truth " + std::to_string(l.gt) +
                       " which does not exist");
    }
  }
}

}  // namespace

double FocalLoss(double p, bool is_positive, double alpha, double gamma) {
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  const double pt = is_positive ? pc : 1.0 - pc;
  double alpha_t = 1.0;
  if (alpha >= 0.0) alpha_t = is_positive ? alpha : 1.0 - alpha;
  return -alpha_t * std::pow(1.0 - pt, gamma) * std::log(pt);
}

double SmoothL1(const BoxDelta& pred, const BoxDelta& target, double beta) {
  return SmoothL1Term(pred.dx - target.dx, beta) + SmoothL1Term(pred.dy - target.dy, beta) +
         SmoothL1Term(pred.dw - target.dw, beta) + SmoothL1Term(pred.dh - target.dh, beta) +
         SmoothL1Term(pred.dtheta - target.dtheta, beta);
}

double PairwiseSum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return PairwiseSum(values.first(half)) + PairwiseSum(values.subspan(half));
}

StageLoss EvaluateStage(const StageBatch& batch, const LossOptions& options) {
  CheckBatch(batch);
  StageLoss out;
  const std::size_t n = batch.size();
  if (n == 0) return out;

  std::vector<double> cls_terms;
  std::vector<double> reg_terms;
  cls_terms.reserve(n * batch.num_classes);
  for (std::size_t a = 0; a < n; ++a) {
    const AnchorLabel& label = batch.assignment->labels[a];
    if (label.ignored()) continue;
    const int target_class = label.positive() ? batch.gt_labels[label.gt] : -1;
    for (int k = 0; k < batch.num_classes; ++k) {
      const double p = batch.class_probs[a * batch.num_classes + k];
      cls_terms.push_back(FocalLoss(p, k == target_class, options.alpha, options.gamma));
    }
    if (label.positive()) {
      ++out.positives;
      const BoxDelta target = Encode(batch.gt_boxes[label.gt], batch.anchors[a]);
      reg_terms.push_back(SmoothL1(batch.deltas[a], target, options.beta));
    }
  }
  out.cls = PairwiseSum(cls_terms);
  out.reg = PairwiseSum(reg_terms);
  return out;
}

LossBreakdown MultitaskLoss(const StageBatch& fam, const StageBatch& odm,
                            const LossOptions& options) {
  const StageLoss f = EvaluateStage(fam, options);
  const StageLoss o = EvaluateStage(odm, options);
  LossBreakdown out;
  out.fam_cls = f.cls;
  out.fam_reg = f.reg;
  out.odm_cls = o.cls;
  out.odm_reg = o.reg;
  out.n_fam_pos = f.positives;
  out.n_odm_pos = o.positives;
  out.fam_normalizer = static_cast<double>(std::max<std::size_t>(1, f.positives));
  out.odm_normalizer = static_cast<double>(std::max<std::size_t>(1, o.positives));
  out.empty = fam.size() == 0 && odm.size() == 0;
  out.total = (out.fam_cls + out.fam_reg) / out.fam_normalizer +
              options.lambda * ((out.odm_cls + out.odm_reg) / out.odm_normalizer);
  return out;
}

}  // namespace orientdet
