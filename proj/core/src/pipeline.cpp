#include "orientdet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <tuple>

#include "orientdet/error.hpp"

namespace orientdet {

std::vector<int> TileOrigins(int dim, int chip, int stride) {
  std::vector<int> origins;
  for (int o = 0;; o += stride) {
    if (o + chip >= dim) {
      const int last = std::max(dim - chip, 0);
      if (origins.empty() || origins.back() != last) origins.push_back(last);
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

TilePlan PlanTiles(int image_width, int image_height, int chip, int stride) {
  if (image_width <= 0 || image_height <= 0) {
    throw Error("image dimensions must be positive");
  }
  if (chip < 1) throw Error("chip size must be at least 1");
  if (stride < 1 || stride > chip) {
    throw Error("stride " + std::to_string(stride) + " must lie in [1, chip=" +
                std::to_string(chip) + "]");
  }
  TilePlan plan{image_width, image_height, chip, stride, {}};
  const auto xs = TileOrigins(image_width, chip, stride);
  const auto ys = TileOrigins(image_height, chip, stride);
  const int ww = std::min(chip, image_width);
  const int wh = std::min(chip, image_height);
  for (int y : ys) {
    for (int x : xs) plan.windows.push_back({x, y, ww, wh});
  }
  return plan;
}

Detection ChipToGlobal(const Detection& det, const Window& window) {
  Detection out = det;
  out.box.cx += window.x0;
  out.box.cy += window.y0;
  return out;
}

Detection GlobalToChip(const Detection& det, const Window& window) {
  Detection out = det;
  out.box.cx -= window.x0;
  out.box.cy -= window.y0;
  return out;
}

void SortCanonical(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    return std::make_tuple(-a.score, a.class_id, a.box.cx, a.box.cy, a.box.w, a.box.h,
                           a.box.theta) < std::make_tuple(-b.score, b.class_id, b.box.cx, b.box.cy,
                                                          b.box.w, b.box.h, b.box.theta);
  });
}

std::vector<Detection> MergeDetections(std::span<const ChipDetections> chips,
                                       double nms_threshold) {
  std::vector<Detection> all;
  for (const ChipDetections& chip : chips) {
    for (const Detection& d : chip.detections) all.push_back(ChipToGlobal(d, chip.window));
  }
  SortCanonical(all);
  return RotatedNms(all, {nms_threshold, true});
}

std::vector<Detection> SimulateChipDetections(std::span<const LabeledBox> gts, const Window& window,
                                              const JitterSpec& jitter, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Detection> out;
  for (const LabeledBox& gt : gts) {
    if (!window.ContainsPoint(gt.box.cx, gt.box.cy)) continue;
    Detection det{gt.box, gt.class_id, 1.0};
    if (!jitter.zero()) {
      double magnitude = 0.0;
      int perturbed = 0;
      auto draw = [&](double amplitude) {
        const double u = unit(rng);
        if (amplitude != 0.0) {
          magnitude += std::abs(u);
          ++perturbed;
        }
        return u * amplitude;
      };
      OrientedBox raw = gt.box;
      raw.cx += draw(jitter.center);
      raw.cy += draw(jitter.center);
      raw.w *= 1.0 + draw(jitter.side);
      raw.h *= 1.0 + draw(jitter.side);
      raw.theta += draw(jitter.angle);
      det.box = Canonicalize(raw);
      det.score = std::clamp(1.0 - jitter.score_decay * magnitude / perturbed, 0.0, 1.0);
    }
    out.push_back(GlobalToChip(det, window));
  }
  return out;
}

std::vector<Detection> SimulateWholeImage(std::span<const LabeledBox> gts, int image_width,
                                          int image_height, const JitterSpec& jitter,
                                          std::uint64_t seed) {
  return SimulateChipDetections(gts, {0, 0, image_width, image_height}, jitter, seed);
}

std::vector<Detection> SimulateTiled(std::span<const LabeledBox> gts, const TilePlan& plan,
                                     const JitterSpec& jitter, std::uint64_t seed,
                                     double nms_threshold) {
  std::vector<ChipDetections> chips;
  chips.reserve(plan.windows.size());
  for (std::size_t i = 0; i < plan.windows.size(); ++i) {
    chips.push_back({plan.windows[i],
                     SimulateChipDetections(gts, plan.windows[i], jitter, seed + i)});
  }
  return MergeDetections(chips, nms_threshold);
}

// ---------------------------------------------------------------------------
// Head forward pass.

void HeadConfig::Validate() const {
  if (channels <= 0 || num_classes <= 0) throw ShapeError("head channels and classes must be positive");
  if (fam_depth < 1 || odm_depth < 1) throw ShapeError("head depths must be at least 1");
  if (orientations != 1 && orientations != 2 && orientations != 4 && orientations != 8) {
    throw ShapeError("orientation count must be 1, 2, 4 or 8");
  }
  if (channels % orientations != 0) {
    throw ShapeError("channels must be divisible by the orientation count");
  }
  if (kernel_size != 3) throw ShapeError("the head uses 3x3 kernels");
}

namespace {

ConvKernel RandomKernel(int out, int in, int k, std::mt19937_64& rng, double gain) {
  ConvKernel kernel(out, in, k);
  const double bound = gain * std::sqrt(6.0 / (static_cast<double>(in) * k * k));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : kernel.weights()) w = dist(rng);
  return kernel;
}

void Relu(FeatureGrid& g) {
  for (double& v : g.values()) v = std::max(v, 0.0);
}

void Sigmoid(FeatureGrid& g) {
  for (double& v : g.values()) v = 1.0 / (1.0 + std::exp(-v));
}

FeatureGrid RunTower(FeatureGrid x, const std::vector<ConvKernel>& tower) {
  for (const ConvKernel& k : tower) {
    x = Conv2dRef(x, k);
    Relu(x);
  }
  return x;
}

BoxDelta DeltaAt(const FeatureGrid& g, int y, int x) {
  return {g.at(y, x, 0), g.at(y, x, 1), g.at(y, x, 2), g.at(y, x, 3), g.at(y, x, 4)};
}

}  // namespace

HeadWeights HeadWeights::Random(const HeadConfig& config, std::uint64_t seed, double delta_scale) {
  config.Validate();
  std::mt19937_64 rng(seed);
  const int c = config.channels;
  const int k = config.kernel_size;
  const int base = c / config.orientations;
  HeadWeights w;
  for (int i = 0; i < config.fam_depth; ++i) w.fam_reg_tower.push_back(RandomKernel(c, c, k, rng, 1.0));
  w.fam_reg_out = RandomKernel(5, c, k, rng, delta_scale);
  for (int i = 0; i < config.fam_depth; ++i) w.fam_cls_tower.push_back(RandomKernel(c, c, k, rng, 1.0));
  w.fam_cls_out = RandomKernel(config.num_classes, c, k, rng, 1.0);
  w.align = RandomKernel(c, c, k, rng, 1.0);

  w.arf = RotatingFilter(base, base, config.orientations);
  const double arf_bound = std::sqrt(6.0 / (static_cast<double>(c) * 9));
  std::uniform_real_distribution<double> arf_dist(-arf_bound, arf_bound);
  for (double& v : w.arf.weights()) v = arf_dist(rng);

  for (int i = 0; i < config.odm_depth; ++i) {
    w.odm_cls_tower.push_back(RandomKernel(c, i == 0 ? base : c, k, rng, 1.0));
  }
  w.odm_cls_out = RandomKernel(config.num_classes, c, k, rng, 1.0);
  for (int i = 0; i < config.odm_depth; ++i) w.odm_reg_tower.push_back(RandomKernel(c, c, k, rng, 1.0));
  w.odm_reg_out = RandomKernel(5, c, k, rng, delta_scale);
  return w;
}

std::vector<HeadLevelOutput> HeadForward(std::span<const FeatureGrid> features,
                                         const HeadConfig& config, const HeadWeights& weights,
                                         std::span<const AnchorMap> anchors,
                                         const HeadOptions& options) {
  config.Validate();
  if (features.size() != anchors.size()) {
    throw ShapeError("one anchor map per feature level required");
  }
  const int k = config.kernel_size;
  std::vector<HeadLevelOutput> outputs;
  outputs.reserve(features.size());
  for (std::size_t level = 0; level < features.size(); ++level) {
    const FeatureGrid& x = features[level];
    const AnchorMap& prior = anchors[level];
    if (x.channels() != config.channels) {
      throw ShapeError("level " + std::to_string(level) + " has " + std::to_string(x.channels()) +
                       " channels, head expects " + std::to_string(config.channels));
    }
    if (prior.height() != x.height() || prior.width() != x.width()) {
      throw ShapeError("level " + std::to_string(level) + " anchor map does not match the grid");
    }
    const int stride = prior.stride();
    HeadLevelOutput out;

    // FAM: anchor refinement network, regression branch.
    out.fam_deltas = Conv2dRef(RunTower(x, weights.fam_reg_tower), weights.fam_reg_out);
    if (out.fam_deltas.channels() != 5) throw ShapeError("FAM regression must output 5 channels");
    if (options.keep_fam_classification) {
      out.fam_scores = Conv2dRef(RunTower(x, weights.fam_cls_tower), weights.fam_cls_out);
      Sigmoid(out.fam_scores);
    }
    out.refined_anchors = AnchorMap(prior.height(), prior.width(), stride);
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) {
        out.refined_anchors.at(y, xx) =
            Decode(DeltaAt(out.fam_deltas, y, xx), prior.at(y, xx), options.decode).box;
      }
    }

    // FAM: alignment convolution layer.
    out.offsets = ComputeOffsetField(out.refined_anchors, k, stride);
    out.aligned = AlignConv(x, weights.align, out.offsets);
    Relu(out.aligned);

    // ODM: orientation-sensitive and orientation-invariant features.
    out.oriented = ArfConv(OrientedFeatureGrid(out.aligned, config.orientations), weights.arf);
    Relu(out.oriented.grid());
    out.pooled = OrientationPool(out.oriented);

    out.odm_scores = Conv2dRef(RunTower(out.pooled, weights.odm_cls_tower), weights.odm_cls_out);
    Sigmoid(out.odm_scores);
    out.odm_deltas =
        Conv2dRef(RunTower(out.oriented.grid(), weights.odm_reg_tower), weights.odm_reg_out);
    if (out.odm_deltas.channels() != 5) throw ShapeError("ODM regression must output 5 channels");

    out.candidates.reserve(static_cast<std::size_t>(x.height()) * x.width());
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) {
        const auto scores = out.odm_scores.pixel(y, xx);
        const auto best = std::max_element(scores.begin(), scores.end());
        Detection det;
        det.box = Decode(DeltaAt(out.odm_deltas, y, xx), out.refined_anchors.at(y, xx),
                         options.decode)
                      .box;
        det.class_id = static_cast<int>(best - scores.begin());
        det.score = *best;
        out.candidates.push_back(det);
      }
    }
    if (options.keep_fam_classification) {
      out.fam_candidates.reserve(out.candidates.size());
      for (int y = 0; y < x.height(); ++y) {
        for (int xx = 0; xx < x.width(); ++xx) {
          const auto scores = out.fam_scores.pixel(y, xx);
          const auto best = std::max_element(scores.begin(), scores.end());
          out.fam_candidates.push_back({out.refined_anchors.at(y, xx),
                                        static_cast<int>(best - scores.begin()), *best});
        }
      }
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

}  // namespace orientdet
