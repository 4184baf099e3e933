// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "orientdet/anchors.hpp"
#include "orientdet/boxcodec.hpp"
#include "orientdet/evalkit.hpp"
#include "orientdet/featops.hpp"
#include "orientdet/geometry.hpp"
#include "orientdet/ioformats.hpp"
#include "orientdet/losses.hpp"
#include "orientdet/orientation.hpp"
#include "orientdet/pipeline.hpp"
#include "orientdet/postprocess.hpp"

namespace {

using namespace orientdet;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

// Criterion 1
Outcome AlignConvIdentity() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> dim(1, 32), ch(1, 8), stride_pick(0, 3);
  const int strides[] = {1, 4, 8, 16};
  double worst = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) {
    const int h = dim(rng), w = dim(rng), c = ch(rng), o = ch(rng);
    const int s = strides[stride_pick(rng)];
    const FeatureGrid g = oracle::RandomGrid(rng, h, w, c, s);
    const ConvKernel k = oracle::RandomKernel(rng, o, c, 3);
    const OffsetField off = ComputeOffsetField(IdentityAnchorMap(h, w, 3, s), 3, s);
    worst = std::max(worst, oracle::MaxAbsDiff(AlignConv(g, k, off), Conv2dRef(g, k)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-12 && secs < 5.0, Fmt("max |diff| %.3g over 100 grids in %.2f s", worst, secs)};
}

// Criterion 2
Outcome OffsetDepth() {
  const OffsetField f = ComputeOffsetField(IdentityAnchorMap(5, 7, 3, 8), 3, 8);
  const FeatureGrid g = OffsetFieldToGrid(f, 8);
  const bool ok = g.channels() == 18 && g.height() == 5 && g.width() == 7 && f.values().size() == 5u * 7u * 18u;
  return {ok, "depth " + std::to_string(g.channels())};
}

// Criterion 3
Outcome RotatedIoUAccuracy() {
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int overlapping = 0;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 10000; ++i) {
    const OrientedBox a = oracle::RandomBox(rng, 100.0, 50.0);
    OrientedBox b = oracle::RandomBox(rng, 100.0, 50.0);
    // Keep most pairs close enough to overlap.
    if (i % 4 != 0) {
      const double reach = 0.5 * (a.w + b.w);
      b.cx = a.cx + u(rng) * reach;
      b.cy = a.cy + u(rng) * reach;
    }
    const double iou = RotatedIoU(a, b);
    if (iou > 0.0) ++overlapping;
    worst = std::max(worst, std::abs(iou - oracle::ScanlineIoU(a, b, 2000)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double diamond = RotatedIoU({0, 0, 10, 10, 0}, {0, 0, 10, 10, std::numbers::pi / 4});
  const double diamond_err = std::abs(diamond - 1.0 / std::sqrt(2.0));
  const bool ok = worst <= 1e-3 && diamond_err <= 1e-9 && secs < 60.0;
  return {ok, Fmt("max |diff| %.3g (", worst) + std::to_string(overlapping) +
                  Fmt(" overlapping), 45 deg square err %.2g, %.1f s", diamond_err, secs)};
}

// Criterion 4
Outcome CodecRoundTrip() {
  std::mt19937_64 rng(1004);
  double worst_center = 0.0, worst_angle = 0.0;
  bool range_ok = true;
  for (int i = 0; i < 100000; ++i) {
    const OrientedBox anchor = oracle::RandomBox(rng, 200.0, 80.0);
    const OrientedBox gt = oracle::RandomBox(rng, 200.0, 80.0);
    const BoxDelta d = Encode(gt, anchor);
    range_ok = range_ok && d.dtheta >= -0.25 && d.dtheta < 0.75;
    const OrientedBox r = Decode(d, anchor).box;
    worst_center = std::max(worst_center, std::hypot(r.cx - gt.cx, r.cy - gt.cy) / gt.w);
    worst_angle = std::max(worst_angle, oracle::AngleDistance(r.theta, gt.theta));
  }
  const bool ok = range_ok && worst_center <= 1e-6 && worst_angle <= 1e-9;
  return {ok, Fmt("center err %.3g*w, angle err %.3g, dtheta in range: ", worst_center, worst_angle) +
                  (range_ok ? "yes" : "no")};
}

// Criterion 5
Outcome NmsMatchesReference() {
  std::mt19937_64 rng(1005);
  std::uniform_int_distribution<int> count(0, 50), cls(0, 2), coarse(0, 9);
  std::uniform_real_distribution<double> score(0, 1);
  int mismatches = 0;
  for (int scene = 0; scene < 500; ++scene) {
    std::vector<Detection> dets;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const double s = coarse(rng) < 3 ? 0.5 : score(rng);
      dets.push_back({oracle::RandomBox(rng, 60.0, 30.0), cls(rng), s});
    }
    for (bool per_class : {true, false}) {
      if (RotatedNmsIndices(dets, {0.5, per_class}) != oracle::BruteForceNms(dets, 0.5, per_class)) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatching scenes of 500"};
}

// Criterion 6
Outcome BilinearGradientCheck() {
  std::mt19937_64 rng(1006);
  const FeatureGrid g = oracle::RandomGrid(rng, 8, 8, 3);
  std::uniform_real_distribution<double> cell(-0.9, 7.9), frac(0.05, 0.95);
  const double h = 1e-5;
  double worst = 0.0;
  auto rel = [](double a, double f) { return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6}); };
  for (int i = 0; i < 1000; ++i) {
    const double x = std::floor(cell(rng)) + frac(rng);
    const double y = std::floor(cell(rng)) + frac(rng);
    const BilinearGradient grad = BilinearSampleGradient(g, {x, y});
    const auto xp = BilinearSample(g, {x + h, y}), xm = BilinearSample(g, {x - h, y});
    const auto yp = BilinearSample(g, {x, y + h}), ym = BilinearSample(g, {x, y - h});
    for (int c = 0; c < 3; ++c) {
      worst = std::max(worst, rel(grad.d_dx[c], (xp[c] - xm[c]) / (2 * h)));
      worst = std::max(worst, rel(grad.d_dy[c], (yp[c] - ym[c]) / (2 * h)));
    }
  }
  return {worst <= 1e-4, Fmt("max relative err %.3g at 1000 points", worst)};
}

RotatingFilter RandomFilter(std::mt19937_64& rng, int out, int in, int n) {
  RotatingFilter f(out, in, n);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : f.weights()) v = u(rng);
  return f;
}

FeatureGrid RotateGridClockwise(const FeatureGrid& g) {
  FeatureGrid out(g.width(), g.height(), g.channels(), g.stride());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      for (int ch = 0; ch < g.channels(); ++ch) out.at(c, g.height() - 1 - r, ch) = g.at(r, c, ch);
    }
  }
  return out;
}

FeatureGrid ShiftOrientations(const FeatureGrid& g, int n) {
  FeatureGrid out(g.height(), g.width(), g.channels(), g.stride());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      for (int c = 0; c < g.channels() / n; ++c) {
        for (int i = 0; i < n; ++i) out.at(y, x, c * n + (i + 1) % n) = g.at(y, x, c * n + i);
      }
    }
  }
  return out;
}

// Criterion 7
Outcome ArfClosureAndEquivariance() {
  std::mt19937_64 rng(1007);
  bool closure = true;
  for (int n : {1, 2, 4, 8}) {
    const RotatingFilter f = RandomFilter(rng, 3, 2, n);
    RotatingFilter r = f;
    for (int i = 0; i < n; ++i) r = RotateFilter(r, n > 1 ? 1 : 0);
    closure = closure && r == f;
  }
  double worst = 0.0;
  const int n = 4;
  for (int trial = 0; trial < 10; ++trial) {
    const RotatingFilter f = RandomFilter(rng, 2, 3, n);
    const FeatureGrid x = oracle::RandomGrid(rng, 7, 7, 3 * n);
    const FeatureGrid lhs = ArfConv(OrientedFeatureGrid(ShiftOrientations(RotateGridClockwise(x), n), n), f).grid();
    const FeatureGrid rhs = ShiftOrientations(RotateGridClockwise(ArfConv(OrientedFeatureGrid(x, n), f).grid()), n);
    worst = std::max(worst, oracle::MaxAbsDiff(lhs, rhs));
  }
  return {closure && worst <= 1e-10,
          std::string("closure ") + (closure ? "exact" : "broken") + Fmt(", N=4 equivariance err %.3g", worst)};
}

// Criterion 8
Outcome OrientationPooling() {
  std::mt19937_64 rng(1008);
  FeatureGrid x = oracle::RandomGrid(rng, 4, 5, 256);
  const FeatureGrid p = OrientationPool(OrientedFeatureGrid(x, 8));
  bool dominance = p.channels() == 32;
  for (int y = 0; y < 4 && dominance; ++y) {
    for (int xx = 0; xx < 5; ++xx) {
      for (int c = 0; c < 32; ++c) {
        bool attained = false;
        for (int n = 0; n < 8; ++n) {
          dominance = dominance && p.at(y, xx, c) >= x.at(y, xx, c * 8 + n);
          attained = attained || p.at(y, xx, c) == x.at(y, xx, c * 8 + n);
        }
        dominance = dominance && attained;
      }
    }
  }
  bool invariant = true;
  for (int s = 0; s < 8; ++s) {
    x = ShiftOrientations(x, 8);
    invariant = invariant && OrientationPool(OrientedFeatureGrid(x, 8)).values() == p.values();
  }
  return {dominance && invariant, std::to_string(p.channels()) + " channels, max-dominance " +
                                      (dominance ? "holds" : "fails") + ", cyclic invariance " +
                                      (invariant ? "holds" : "fails")};
}

// Criterion 9
Outcome AnchorsAndAssignment() {
  const PyramidSpec spec = PyramidSpec::Default();
  std::vector<GridSize> sizes(spec.levels.size(), GridSize{2, 2});
  const auto maps = GenerateAnchors(spec, sizes);
  bool sizes_ok = maps.size() == 5;
  const double sides[] = {32, 64, 128, 256, 512};
  for (std::size_t l = 0; l < maps.size() && sizes_ok; ++l) {
    for (const OrientedBox& b : maps[l].boxes()) sizes_ok = sizes_ok && b.w == sides[l] && b.h == sides[l];
  }
  AssignOptions opt;
  const bool defaults = opt.fg_threshold == 0.5 && opt.bg_threshold == 0.4;
  opt.low_quality_rescue = false;
  const std::vector<OrientedBox> anchor = {{5, 5, 10, 10, 0}};
  const std::vector<OrientedBox> half = {{5, 2.5, 10, 5, 0}}, forty = {{5, 2, 10, 4, 0}}, low = {{5, 1.5, 10, 3, 0}};
  bool bounds = Assign(anchor, half, opt).labels[0].positive() && Assign(anchor, forty, opt).labels[0].ignored() &&
                Assign(anchor, low, opt).labels[0].negative();
  std::mt19937_64 rng(1009);
  std::vector<OrientedBox> anchors, gts;
  for (int i = 0; i < 300; ++i) anchors.push_back(oracle::RandomBox(rng, 60.0, 30.0));
  for (int i = 0; i < 10; ++i) gts.push_back(oracle::RandomBox(rng, 60.0, 30.0));
  const Assignment a = Assign(anchors, gts, opt);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    double best = 0.0;
    for (const OrientedBox& g : gts) best = std::max(best, RotatedIoU(anchors[i], g));
    const AnchorLabel& l = a.labels[i];
    bounds = bounds && (best >= 0.5 ? l.positive() : best < 0.4 ? l.negative() : l.ignored());
  }
  return {sizes_ok && defaults && bounds, std::string("sizes 32..512 ") + (sizes_ok ? "ok" : "wrong") +
                                              ", thresholds 0.5/0.4 " + (defaults && bounds ? "respected" : "violated")};
}

bool AxisCovered(std::vector<std::pair<int, int>> spans, int dim) {
  std::sort(spans.begin(), spans.end());
  if (spans.empty() || spans.front().first != 0) return false;
  int reach = 0;
  for (const auto& [lo, len] : spans) {
    if (lo < 0 || lo + len > dim || lo > reach) return false;
    reach = std::max(reach, lo + len);
  }
  return reach == dim;
}

bool PlanCovers(const TilePlan& plan) {
  std::vector<std::pair<int, int>> xs, ys;
  for (const Window& w : plan.windows) {
    xs.push_back({w.x0, w.w});
    ys.push_back({w.y0, w.h});
  }
  return AxisCovered(xs, plan.image_width) && AxisCovered(ys, plan.image_height);
}

// Criterion 10
Outcome Tiling() {
  const TilePlan base = PlanTiles(4000, 4000, 1024, 824);
  const bool base_ok = base.windows.size() == 25 && PlanCovers(base);
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<int> dim(1, 5000), chip(1, 1500);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const int w = dim(rng), h = dim(rng), c = chip(rng);
    const int s = std::uniform_int_distribution<int>(1, c)(rng);
    if (!PlanCovers(PlanTiles(w, h, c, s))) ++failures;
  }
  return {base_ok && failures == 0,
          std::to_string(base.windows.size()) + " windows on 4000x4000, " + std::to_string(failures) +
              " coverage failures of 1000"};
}

std::vector<LabeledBox> NonOverlappingGts(std::mt19937_64& rng, int n, int extent, int classes) {
  std::uniform_int_distribution<int> pos(0, extent * 16), side(16 * 8, 16 * 80), cls(0, classes - 1);
  std::uniform_real_distribution<double> ang(kAngleLow, kAngleHigh);
  std::vector<LabeledBox> gts;
  while (static_cast<int>(gts.size()) < n) {
    const OrientedBox b =
        Canonicalize({pos(rng) / 16.0, pos(rng) / 16.0, side(rng) / 16.0, side(rng) / 16.0, ang(rng)});
    const bool clear =
        std::all_of(gts.begin(), gts.end(), [&](const LabeledBox& g) { return RotatedIoU(g.box, b) == 0.0; });
    if (clear) gts.push_back({b, cls(rng)});
  }
  return gts;
}

int RunCli(std::vector<std::string> args, std::string& out, std::string& err) {
  args.insert(args.begin(), "orientdet");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::Run(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  err = e.str();
  return code;
}

GroundTruth Gt(double cx) { return {"img", {cx, 0, 10, 10, 0}}; }
ScoredBox Det(double cx, double score) { return {"img", {cx, 0, 10, 10, 0}, score}; }

// Criterion 11
Outcome EndToEnd() {
  std::mt19937_64 rng(1011);
  const auto& names = DotaCategories();
  const auto gts = NonOverlappingGts(rng, 150, 4000, 4);
  const auto dets = SimulateTiled(gts, PlanTiles(4000, 4000, 1024, 824), {}, 7);
  auto key = [](const OrientedBox& b, int c) { return std::make_tuple(b.cx, b.cy, b.w, b.h, b.theta, c); };
  std::vector<std::tuple<double, double, double, double, double, int>> a, b;
  for (const Detection& d : dets) a.push_back(key(d.box, d.class_id));
  for (const LabeledBox& g : gts) b.push_back(key(g.box, g.class_id));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const bool exact = a == b;

  const fs::path dir = fs::temp_directory_path() / ("orientdet_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir / "gt");
  AnnotationFile ann;
  for (const LabeledBox& g : gts) ann.records.push_back({BoxToQuad(g.box), names[g.class_id], 0});
  WriteFileAtomic(dir / "gt" / "scene.txt", FormatDotaAnnotation(ann));
  DetectionsByClass by_class;
  for (const Detection& d : dets) by_class[names[d.class_id]].push_back({"scene", d.box, d.score});
  WriteDetections(dir / "dets", by_class);
  std::string out, err;
  const int code = RunCli({"eval", "--dets", (dir / "dets").string(), "--gt", (dir / "gt").string(), "--iou",
                           "0.5", "--json"},
                          out, err);
  double cli_map = -1.0;
  if (code == 0) cli_map = nlohmann::json::parse(out)["map"][0].get<double>();
  fs::remove_all(dir);

  // Hand-ranked scene: TP, FP, TP against two gts.
  const std::vector<GroundTruth> hand_gts = {Gt(0), Gt(100)};
  const std::vector<ScoredBox> hand_dets = {Det(0.5, 0.9), Det(1, 0.8), Det(101, 0.7)};
  const PRCurve curve = MatchDetections(hand_dets, hand_gts, 0.5);
  const double voc12 = AveragePrecision(curve, ApMetric::kVoc12).ap;
  const double voc07 = AveragePrecision(curve, ApMetric::kVoc07).ap;
  const bool hand_ok = std::abs(voc12 - 5.0 / 6.0) <= 1e-9 && std::abs(voc07 - 28.0 / 33.0) <= 1e-9;
  return {exact && cli_map == 1.0 && hand_ok,
          std::string("tiled reproduction ") + (exact ? "exact" : "differs") + Fmt(", eval mAP %.4f", cli_map) +
              Fmt(", hand scene voc12 %.10f voc07 %.10f", voc12, voc07)};
}

double Huber(double d, double beta) {
  d = std::abs(d);
  return d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
}

double ManualFocal(double p, bool pos) {
  return pos ? -0.25 * (1 - p) * (1 - p) * std::log(p) : -0.75 * p * p * std::log(1 - p);
}

// Criterion 12
Outcome MultitaskLossScene() {
  using Kind = AnchorLabel::Kind;
  const std::vector<OrientedBox> anchors = {{16, 16, 32, 32, 0.0}, {80, 16, 32, 32, 0.0}};
  const std::vector<OrientedBox> gts = {{20, 14, 40, 20, 0.25}};
  const std::vector<int> labels = {1};
  Assignment assignment;
  assignment.labels = {{Kind::kPositive, 0}, {Kind::kNegative, -1}};
  assignment.max_iou = {0.6, 0.0};
  const std::vector<double> fam_probs = {0.1, 0.8, 0.3, 0.05}, odm_probs = {0.2, 0.6, 0.1, 0.1};
  const std::vector<BoxDelta> fam_deltas = {{0.1, -0.05, 0.2, -0.4, 0.1}, {0.5, 0.5, 0.5, 0.5, 0.5}};
  const std::vector<BoxDelta> odm_deltas = {{-0.1, 0.05, 0.1, -0.2, 0.05}, {0, 0, 0, 0, 0}};
  auto batch = [&](const std::vector<double>& p, const std::vector<BoxDelta>& d) {
    StageBatch b;
    b.num_classes = 2;
    b.class_probs = p;
    b.deltas = d;
    b.anchors = anchors;
    b.assignment = &assignment;
    b.gt_boxes = gts;
    b.gt_labels = labels;
    return b;
  };
  const double tx = 4.0 / 32, ty = -2.0 / 32, tw = std::log(40.0 / 32), th = std::log(20.0 / 32);
  const double tt = 0.25 / std::numbers::pi, beta = 1.0 / 9.0;
  auto cls = [&](const std::vector<double>& p) {
    return ManualFocal(p[0], false) + ManualFocal(p[1], true) + ManualFocal(p[2], false) + ManualFocal(p[3], false);
  };
  auto reg = [&](const BoxDelta& d) {
    return Huber(d.dx - tx, beta) + Huber(d.dy - ty, beta) + Huber(d.dw - tw, beta) + Huber(d.dh - th, beta) +
           Huber(d.dtheta - tt, beta);
  };
  const double lambda = 0.7;
  const double expected = (cls(fam_probs) + reg(fam_deltas[0])) / 1.0 +
                          lambda * (cls(odm_probs) + reg(odm_deltas[0])) / 1.0;
  LossOptions opt;
  opt.lambda = lambda;
  const LossBreakdown got = MultitaskLoss(batch(fam_probs, fam_deltas), batch(odm_probs, odm_deltas), opt);
  const double err = std::abs(got.total - expected);

  // Linearity in lambda, bit for bit on the decomposition.
  bool linear = true;
  for (double l : {0.0, 0.5, 1.0, 2.0, 3.25}) {
    LossOptions o;
    o.lambda = l;
    const LossBreakdown b = MultitaskLoss(batch(fam_probs, fam_deltas), batch(odm_probs, odm_deltas), o);
    const double f = (b.fam_cls + b.fam_reg) / b.fam_normalizer;
    const double g = (b.odm_cls + b.odm_reg) / b.odm_normalizer;
    linear = linear && b.total == f + l * g;
  }
  return {err <= 1e-9 && linear,
          Fmt("total err %.3g vs hand value %.12f", err, expected) + ", lambda linearity " + (linear ? "exact" : "broken")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"alignment conv with identity offsets equals plain conv", AlignConvIdentity},
      {"offset field depth is 2k^2 = 18", OffsetDepth},
      {"rotated IoU against scanline rasterization", RotatedIoUAccuracy},
      {"box codec round trip", CodecRoundTrip},
      {"rotated NMS equals brute-force reference", NmsMatchesReference},
      {"bilinear gradient against finite differences", BilinearGradientCheck},
      {"active rotating filter closure and equivariance", ArfClosureAndEquivariance},
      {"orientation pooling", OrientationPooling},
      {"anchor sizes and assignment thresholds", AnchorsAndAssignment},
      {"tiling coverage", Tiling},
      {"tile, merge and evaluate end to end", EndToEnd},
      {"multi-task loss on a hand-enumerated scene", MultitaskLossScene},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
