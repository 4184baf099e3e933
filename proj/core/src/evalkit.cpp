#include "orientdet/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "orientdet/error.hpp"
#include "orientdet/parallel.hpp"

namespace orientdet {

namespace {

void FillCurve(PRCurve& curve) {
  std::size_t tp = 0;
  std::size_t seen = 0;
  curve.precision.clear();
  curve.recall.clear();
  for (MatchKind kind : curve.kinds) {
    if (kind == MatchKind::kIgnored) continue;
    ++seen;
    if (kind == MatchKind::kTruePositive) ++tp;
    curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
    curve.recall.push_back(curve.num_gt == 0
                               ? 0.0
                               : static_cast<double>(tp) / static_cast<double>(curve.num_gt));
  }
  curve.true_positives = tp;
}

std::string FormatFixed(double v, int decimals) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

}  // namespace

PRCurve MatchDetections(std::span<const ScoredBox> dets, std::span<const GroundTruth> gts,
                        double iou_threshold) {
  PRCurve curve;
  std::unordered_map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    by_image[gts[g].image_id].push_back(g);
    if (!gts[g].difficult) ++curve.num_gt;
  }

  curve.order.resize(dets.size());
  std::iota(curve.order.begin(), curve.order.end(), 0);
  std::stable_sort(curve.order.begin(), curve.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<bool> matched(gts.size(), false);
  curve.kinds.reserve(dets.size());
  for (std::size_t idx : curve.order) {
    const ScoredBox& det = dets[idx];
    double best_iou = -1.0;
    std::size_t best_gt = gts.size();
    bool hits_difficult = false;
    if (const auto it = by_image.find(det.image_id); it != by_image.end()) {
      for (std::size_t g : it->second) {
        const double iou = RotatedIoU(det.box, gts[g].box);
        if (iou < iou_threshold) continue;
        if (gts[g].difficult) {
          hits_difficult = true;
        } else if (!matched[g] && iou > best_iou) {
          best_iou = iou;
          best_gt = g;
        }
      }
    }
    if (best_gt < gts.size()) {
      matched[best_gt] = true;
      curve.kinds.push_back(MatchKind::kTruePositive);
    } else if (hits_difficult) {
      curve.kinds.push_back(MatchKind::kIgnored);
    } else {
      curve.kinds.push_back(MatchKind::kFalsePositive);
    }
  }
  FillCurve(curve);
  return curve;
}

PRCurve CurveFromFlags(std::span<const bool> ranked_is_tp, std::size_t num_gt) {
  PRCurve curve;
  curve.num_gt = num_gt;
  for (std::size_t i = 0; i < ranked_is_tp.size(); ++i) {
    curve.order.push_back(i);
    curve.kinds.push_back(ranked_is_tp[i] ? MatchKind::kTruePositive : MatchKind::kFalsePositive);
  }
  FillCurve(curve);
  if (curve.true_positives > num_gt) throw Error("more true positives than ground truths");
  return curve;
}

const char* MetricName(ApMetric metric) {
  return metric == ApMetric::kVoc07 ? "voc07" : "voc12";
}

ApMetric ParseMetric(const std::string& name) {
  if (name == "voc07") return ApMetric::kVoc07;
  if (name == "voc12") return ApMetric::kVoc12;
  throw Error("unknown AP metric '" + name + "' (expected voc07 or voc12)");
}

ApResult AveragePrecision(const PRCurve& curve, ApMetric metric) {
  if (curve.num_gt == 0) return {0.0, true};
  const auto& prec = curve.precision;
  const auto& rec = curve.recall;
  if (metric == ApMetric::kVoc07) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0.0;
      for (std::size_t j = 0; j < rec.size(); ++j) {
        if (rec[j] >= t) p = std::max(p, prec[j]);
      }
      sum += p;
    }
    return {sum / 11.0, false};
  }

  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), rec.begin(), rec.end());
  mpre.insert(mpre.end(), prec.begin(), prec.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i-- > 0;) mpre[i] = std::max(mpre[i], mpre[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) {
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  }
  return {ap, false};
}

std::vector<double> RangeThresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

EvalReport MapEval(const DetectionsByClass& dets, const GroundTruthByClass& gts,
                   std::span<const double> thresholds, ApMetric metric, int threads) {
  EvalReport report;
  report.metric = metric;
  report.thresholds.assign(thresholds.begin(), thresholds.end());

  std::vector<std::string> names;
  for (const auto& [name, _] : gts) names.push_back(name);
  for (const auto& [name, _] : dets) names.push_back(name);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  static const std::vector<ScoredBox> kNoDets;
  static const std::vector<GroundTruth> kNoGts;
  report.classes.resize(names.size());
  ParallelFor(names.size(), threads, [&](std::size_t i) {
    const std::string& name = names[i];
    const auto d_it = dets.find(name);
    const auto g_it = gts.find(name);
    const auto& class_dets = d_it == dets.end() ? kNoDets : d_it->second;
    const auto& class_gts = g_it == gts.end() ? kNoGts : g_it->second;
    ClassReport& cr = report.classes[i];
    cr.name = name;
    cr.num_det = class_dets.size();
    cr.num_gt = static_cast<std::size_t>(std::count_if(
        class_gts.begin(), class_gts.end(), [](const GroundTruth& g) { return !g.difficult; }));
    for (double thr : thresholds) {
      cr.ap.push_back(AveragePrecision(MatchDetections(class_dets, class_gts, thr), metric));
    }
    cr.excluded = cr.num_gt == 0;
  });

  const auto counted = std::count_if(report.classes.begin(), report.classes.end(),
                                     [](const ClassReport& c) { return !c.excluded; });
  report.no_ground_truth = counted == 0;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    double sum = 0.0;
    for (const ClassReport& c : report.classes) {
      if (!c.excluded) sum += c.ap[t].ap;
    }
    report.map.push_back(counted == 0 ? 0.0 : sum / static_cast<double>(counted));
  }
  if (!report.map.empty()) {
    report.map_mean = std::accumulate(report.map.begin(), report.map.end(), 0.0) /
                      static_cast<double>(report.map.size());
  }
  return report;
}

std::string FormatTsv(const EvalReport& report) {
  std::ostringstream out;
  out << "class\tnum_gt\tnum_det";
  for (double t : report.thresholds) out << "\tAP@" << FormatFixed(t, 2);
  out << '\n';
  for (const ClassReport& c : report.classes) {
    out << c.name << '\t' << c.num_gt << '\t' << c.num_det;
    for (const ApResult& ap : c.ap) out << '\t' << (c.excluded ? "n/a" : FormatFixed(ap.ap, 4));
    out << '\n';
  }
  out << "mAP\t-\t-";
  for (double m : report.map) out << '\t' << FormatFixed(m, 4);
  out << '\n';
  if (report.thresholds.size() > 1) {
    out << "mAP(mean over thresholds)\t-\t-\t" << FormatFixed(report.map_mean, 4) << '\n';
  }
  return out.str();
}

std::string FormatJson(const EvalReport& report) {
  nlohmann::json j;
  j["metric"] = MetricName(report.metric);
  j["thresholds"] = report.thresholds;
  j["classes"] = nlohmann::json::array();
  for (const ClassReport& c : report.classes) {
    nlohmann::json jc;
    jc["name"] = c.name;
    jc["num_gt"] = c.num_gt;
    jc["num_det"] = c.num_det;
    jc["excluded"] = c.excluded;
    std::vector<double> aps;
    for (const ApResult& ap : c.ap) aps.push_back(ap.ap);
    jc["ap"] = aps;
    j["classes"].push_back(std::move(jc));
  }
  j["map"] = report.map;
  j["map_mean"] = report.map_mean;
  j["no_ground_truth"] = report.no_ground_truth;
  return j.dump(2);
}

}  // namespace orientdet
