#pragma once

// Dense reference kernels for standard convolution and alignment convolution.
//
// Grids are stored height x width x channels, row-major. Spatial points are
// (x, y) with x the column index. Kernel taps are enumerated row-major over
// the k x k grid: tap t has offset r = (t % k - k/2, t / k - k/2), so for k = 3
// the order is (-1,-1), (0,-1), (1,-1), (-1,0), ... , (1,1).

#include <cstddef>
#include <span>
#include <vector>

#include "orientdet/geometry.hpp"

namespace orientdet {

class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int height, int width, int channels, int stride = 1);
  FeatureGrid(int height, int width, int channels, int stride, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  int stride() const { return stride_; }

  double& at(int y, int x, int c) { return values_[Index(y, x, c)]; }
  double at(int y, int x, int c) const { return values_[Index(y, x, c)]; }

  // Channel vector at an integer location; no bounds check.
  std::span<const double> pixel(int y, int x) const {
    return {values_.data() + Index(y, x, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<double> pixel(int y, int x) {
    return {values_.data() + Index(y, x, 0), static_cast<std::size_t>(channels_)};
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool SameShape(const FeatureGrid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

 private:
  std::size_t Index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  int stride_ = 1;
  std::vector<double> values_;
};

// Weights indexed [out][in][tap], tap order as described above.
class ConvKernel {
 public:
  ConvKernel() = default;
  ConvKernel(int out_channels, int in_channels, int k = 3);

  int out_channels() const { return out_; }
  int in_channels() const { return in_; }
  int size() const { return k_; }
  int taps() const { return k_ * k_; }

  double& at(int o, int c, int tap) { return weights_[Index(o, c, tap)]; }
  double at(int o, int c, int tap) const { return weights_[Index(o, c, tap)]; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::size_t Index(int o, int c, int tap) const {
    return (static_cast<std::size_t>(o) * in_ + c) * (k_ * k_) + tap;
  }

  int out_ = 0;
  int in_ = 0;
  int k_ = 0;
  std::vector<double> weights_;
};

struct GridIndex {
  int x = 0;
  int y = 0;
};

// Integer offsets of the k x k kernel taps in tap order.
std::vector<GridIndex> KernelTaps(int k);

// Per-location displacement of every tap: 2k^2 values, stored as
// (dx, dy) pairs in tap order.
class OffsetField {
 public:
  OffsetField() = default;
  OffsetField(int height, int width, int k);

  int height() const { return height_; }
  int width() const { return width_; }
  int kernel_size() const { return k_; }
  int depth() const { return 2 * k_ * k_; }

  Point2 offset(int y, int x, int tap) const {
    const std::size_t i = Index(y, x, tap);
    return {values_[i], values_[i + 1]};
  }
  void set_offset(int y, int x, int tap, Point2 o) {
    const std::size_t i = Index(y, x, tap);
    values_[i] = o.x;
    values_[i + 1] = o.y;
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

 private:
  std::size_t Index(int y, int x, int tap) const {
    return ((static_cast<std::size_t>(y) * width_ + x) * (k_ * k_) + tap) * 2;
  }

  int height_ = 0;
  int width_ = 0;
  int k_ = 0;
  std::vector<double> values_;
};

// One box per feature location, in absolute image coordinates.
class AnchorMap {
 public:
  AnchorMap() = default;
  AnchorMap(int height, int width, int stride);

  int height() const { return height_; }
  int width() const { return width_; }
  int stride() const { return stride_; }
  std::size_t size() const { return boxes_.size(); }

  OrientedBox& at(int y, int x) { return boxes_[static_cast<std::size_t>(y) * width_ + x]; }
  const OrientedBox& at(int y, int x) const {
    return boxes_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<OrientedBox>& boxes() const { return boxes_; }
  std::vector<OrientedBox>& boxes() { return boxes_; }

 private:
  int height_ = 0;
  int width_ = 0;
  int stride_ = 1;
  std::vector<OrientedBox> boxes_;
};

// Anchors whose sampling grid is exactly the regular k x k grid:
// center S*p, w = h = k*S, theta = 0.
AnchorMap IdentityAnchorMap(int height, int width, int k, int stride);

// Bilinear interpolation at a fractional (x, y). Taps outside the grid read
// as zero.
std::vector<double> BilinearSample(const FeatureGrid& fm, Point2 point);
void BilinearSampleInto(const FeatureGrid& fm, Point2 point, std::span<double> out);

struct BilinearGradient {
  std::vector<double> d_dx;
  std::vector<double> d_dy;
};

// Derivative of BilinearSample with respect to the sample point. On integer
// coordinates the right-sided derivative is returned.
BilinearGradient BilinearSampleGradient(const FeatureGrid& fm, Point2 point);

// Y(p) = sum_r W(r) X(p + r), zero padding, same spatial size. Accumulates
// taps in tap order and input channels innermost. Throws ShapeError on a
// channel mismatch.
FeatureGrid Conv2dRef(const FeatureGrid& fm, const ConvKernel& kernel);

// Minimum anchor side accepted by SamplingLocations, in pixels.
inline constexpr double kMinAnchorSide = 1e-3;

// Anchor-guided sampling points in feature-grid coordinates:
// (center + Rotate((w, h) * r / k, theta)) / S, in tap order. The points
// depend only on the anchor; the location p it belongs to enters through the
// offset field. Throws InvalidBoxError for sides below kMinAnchorSide.
std::vector<Point2> SamplingLocations(const OrientedBox& anchor, int k, int stride);

// Offset of each anchor-guided sampling point from the regular grid point
// p + r.
OffsetField ComputeOffsetField(const AnchorMap& anchors, int k, int stride);

// Y(p) = sum_r W(r) X(p + r + o(p, r)) with X read by BilinearSample.
// Throws ShapeError when the offsets do not match the grid or kernel.
FeatureGrid AlignConv(const FeatureGrid& fm, const ConvKernel& kernel, const OffsetField& offsets);

}  // namespace orientdet
