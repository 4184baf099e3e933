#include "orientdet/featops.hpp"

#include <cmath>
#include <string>

#include "orientdet/error.hpp"

namespace orientdet {

namespace {

void RequirePositive(int value, const char* what) {
  if (value <= 0) throw ShapeError(std::string(what) + " must be positive");
}

void RequireOddKernel(int k) {
  if (k <= 0 || k % 2 == 0) throw ShapeError("kernel size must be odd and positive");
}

}  // namespace

FeatureGrid::FeatureGrid(int height, int width, int channels, int stride)
    : height_(height), width_(width), channels_(channels), stride_(stride) {
  RequirePositive(height, "grid height");
  RequirePositive(width, "grid width");
  RequirePositive(channels, "grid channels");
  RequirePositive(stride, "grid stride");
  values_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

FeatureGrid::FeatureGrid(int height, int width, int channels, int stride,
                         std::vector<double> values)
    : FeatureGrid(height, width, channels, stride) {
  if (values.size() != values_.size()) {
    throw ShapeError("grid value count " + std::to_string(values.size()) + " does not match " +
                     std::to_string(values_.size()));
  }
  values_ = std::move(values);
}

ConvKernel::ConvKernel(int out_channels, int in_channels, int k)
    : out_(out_channels), in_(in_channels), k_(k) {
  RequirePositive(out_channels, "kernel output channels");
  RequirePositive(in_channels, "kernel input channels");
  RequireOddKernel(k);
  weights_.assign(static_cast<std::size_t>(out_channels) * in_channels * k * k, 0.0);
}

std::vector<GridIndex> KernelTaps(int k) {
  RequireOddKernel(k);
  const int half = k / 2;
  std::vector<GridIndex> taps;
  taps.reserve(static_cast<std::size_t>(k) * k);
  for (int t = 0; t < k * k; ++t) taps.push_back({t % k - half, t / k - half});
  return taps;
}

OffsetField::OffsetField(int height, int width, int k) : height_(height), width_(width), k_(k) {
  RequirePositive(height, "offset field height");
  RequirePositive(width, "offset field width");
  RequireOddKernel(k);
  values_.assign(static_cast<std::size_t>(height) * width * depth(), 0.0);
}

AnchorMap::AnchorMap(int height, int width, int stride)
    : height_(height), width_(width), stride_(stride) {
  RequirePositive(height, "anchor map height");
  RequirePositive(width, "anchor map width");
  RequirePositive(stride, "anchor map stride");
  boxes_.resize(static_cast<std::size_t>(height) * width);
}

AnchorMap IdentityAnchorMap(int height, int width, int k, int stride) {
  AnchorMap map(height, width, stride);
  const double side = static_cast<double>(k) * stride;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      map.at(y, x) = {static_cast<double>(stride) * x, static_cast<double>(stride) * y, side, side,
                      0.0};
    }
  }
  return map;
}

void BilinearSampleInto(const FeatureGrid& fm, Point2 point, std::span<double> out) {
  for (double& v : out) v = 0.0;
  if (!std::isfinite(point.x) || !std::isfinite(point.y)) return;
  const double fx0 = std::floor(point.x);
  const double fy0 = std::floor(point.y);
  // Entirely outside, including the one-cell fringe that still interpolates.
  if (fx0 < -1.0 || fy0 < -1.0 || fx0 > fm.width() - 1 || fy0 > fm.height() - 1) return;
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double ax = point.x - fx0;
  const double ay = point.y - fy0;

  const int xs[2] = {x0, x0 + 1};
  const int ys[2] = {y0, y0 + 1};
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  for (int j = 0; j < 2; ++j) {
    if (ys[j] < 0 || ys[j] >= fm.height() || wy[j] == 0.0) continue;
    for (int i = 0; i < 2; ++i) {
      if (xs[i] < 0 || xs[i] >= fm.width() || wx[i] == 0.0) continue;
      const double w = wy[j] * wx[i];
      const auto px = fm.pixel(ys[j], xs[i]);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * px[c];
    }
  }
}

std::vector<double> BilinearSample(const FeatureGrid& fm, Point2 point) {
  std::vector<double> out(static_cast<std::size_t>(fm.channels()));
  BilinearSampleInto(fm, point, out);
  return out;
}

BilinearGradient BilinearSampleGradient(const FeatureGrid& fm, Point2 point) {
  const std::size_t channels = static_cast<std::size_t>(fm.channels());
  BilinearGradient g{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
  if (!std::isfinite(point.x) || !std::isfinite(point.y)) return g;
  const int x0 = static_cast<int>(std::floor(point.x));
  const int y0 = static_cast<int>(std::floor(point.y));
  const double ax = point.x - x0;
  const double ay = point.y - y0;

  auto value = [&](int y, int x, std::size_t c) {
    if (x < 0 || y < 0 || x >= fm.width() || y >= fm.height()) return 0.0;
    return fm.at(y, x, static_cast<int>(c));
  };
  for (std::size_t c = 0; c < channels; ++c) {
    const double v00 = value(y0, x0, c);
    const double v01 = value(y0, x0 + 1, c);
    const double v10 = value(y0 + 1, x0, c);
    const double v11 = value(y0 + 1, x0 + 1, c);
    g.d_dx[c] = (1.0 - ay) * (v01 - v00) + ay * (v11 - v10);
    g.d_dy[c] = (1.0 - ax) * (v10 - v00) + ax * (v11 - v01);
  }
  return g;
}

FeatureGrid Conv2dRef(const FeatureGrid& fm, const ConvKernel& kernel) {
  if (fm.channels() != kernel.in_channels()) {
    throw ShapeError("conv input has " + std::to_string(fm.channels()) +
                     " channels, kernel expects " + std::to_string(kernel.in_channels()));
  }
  const auto taps = KernelTaps(kernel.size());
  const int channels = fm.channels();
  FeatureGrid out(fm.height(), fm.width(), kernel.out_channels(), fm.stride());
  for (int y = 0; y < fm.height(); ++y) {
    for (int x = 0; x < fm.width(); ++x) {
      for (int o = 0; o < kernel.out_channels(); ++o) {
        double acc = 0.0;
        for (int t = 0; t < kernel.taps(); ++t) {
          const int yy = y + taps[t].y;
          const int xx = x + taps[t].x;
          if (yy < 0 || yy >= fm.height() || xx < 0 || xx >= fm.width()) continue;
          const auto px = fm.pixel(yy, xx);
          for (int c = 0; c < channels; ++c) acc += kernel.at(o, c, t) * px[c];
        }
        out.at(y, x, o) = acc;
      }
    }
  }
  return out;
}

std::vector<Point2> SamplingLocations(const OrientedBox& anchor, int k, int stride) {
  if (!(anchor.w >= kMinAnchorSide) || !(anchor.h >= kMinAnchorSide) ||
      !std::isfinite(anchor.w) || !std::isfinite(anchor.h)) {
    throw InvalidBoxError("anchor sides must be at least " + std::to_string(kMinAnchorSide) +
                          " px for alignment sampling");
  }
  RequirePositive(stride, "stride");
  const auto taps = KernelTaps(k);
  const double c = std::cos(anchor.theta);
  const double s = std::sin(anchor.theta);
  std::vector<Point2> points;
  points.reserve(taps.size());
  for (const GridIndex& r : taps) {
    // Divide last so the regular-grid case stays exact.
    const double u = anchor.w * r.x / k;
    const double v = anchor.h * r.y / k;
    points.push_back({(anchor.cx + c * u - s * v) / stride, (anchor.cy + s * u + c * v) / stride});
  }
  return points;
}

OffsetField ComputeOffsetField(const AnchorMap& anchors, int k, int stride) {
  const auto taps = KernelTaps(k);
  OffsetField field(anchors.height(), anchors.width(), k);
  for (int y = 0; y < anchors.height(); ++y) {
    for (int x = 0; x < anchors.width(); ++x) {
      const auto points = SamplingLocations(anchors.at(y, x), k, stride);
      for (std::size_t t = 0; t < taps.size(); ++t) {
        field.set_offset(y, x, static_cast<int>(t),
                         {points[t].x - x - taps[t].x, points[t].y - y - taps[t].y});
      }
    }
  }
  return field;
}

FeatureGrid AlignConv(const FeatureGrid& fm, const ConvKernel& kernel, const OffsetField& offsets) {
  if (fm.channels() != kernel.in_channels()) {
    throw ShapeError("align conv input has " + std::to_string(fm.channels()) +
                     " channels, kernel expects " + std::to_string(kernel.in_channels()));
  }
  if (offsets.kernel_size() != kernel.size()) {
    throw ShapeError("offset field depth " + std::to_string(offsets.depth()) + " does not equal 2k^2 = " +
                     std::to_string(2 * kernel.taps()));
  }
  if (offsets.height() != fm.height() || offsets.width() != fm.width()) {
    throw ShapeError("offset field spatial size does not match the feature grid");
  }
  const auto taps = KernelTaps(kernel.size());
  const int channels = fm.channels();
  const std::size_t n_taps = taps.size();
  FeatureGrid out(fm.height(), fm.width(), kernel.out_channels(), fm.stride());
  std::vector<double> samples(n_taps * channels);
  for (int y = 0; y < fm.height(); ++y) {
    for (int x = 0; x < fm.width(); ++x) {
      for (std::size_t t = 0; t < n_taps; ++t) {
        const Point2 o = offsets.offset(y, x, static_cast<int>(t));
        BilinearSampleInto(fm, {x + taps[t].x + o.x, y + taps[t].y + o.y},
                           std::span<double>(samples).subspan(t * channels, channels));
      }
      for (int o = 0; o < kernel.out_channels(); ++o) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n_taps; ++t) {
          const double* s = samples.data() + t * channels;
          for (int c = 0; c < channels; ++c) acc += kernel.at(o, c, static_cast<int>(t)) * s[c];
        }
        out.at(y, x, o) = acc;
      }
    }
  }
  return out;
}

}  // namespace orientdet
