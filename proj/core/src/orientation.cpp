#include "orientdet/orientation.hpp"

#include <algorithm>
#include <string>

#include "orientdet/error.hpp"

namespace orientdet {

RotatingFilter::RotatingFilter(int out_channels, int in_channels, int orientations)
    : out_(out_channels), in_(in_channels), n_(orientations) {
  if (out_channels <= 0 || in_channels <= 0) {
    throw ShapeError("rotating filter channel counts must be positive");
  }
  if (orientations != 1 && orientations != 2 && orientations != 4 && orientations != 8) {
    throw ShapeError("rotating filter supports 1, 2, 4 or 8 orientations, got " +
                     std::to_string(orientations));
  }
  weights_.assign(static_cast<std::size_t>(out_) * in_ * n_ * kTaps, 0.0);
}

OrientedFeatureGrid::OrientedFeatureGrid(FeatureGrid grid, int orientations)
    : grid_(std::move(grid)), n_(orientations) {
  if (orientations <= 0 || grid_.channels() % orientations != 0) {
    throw ShapeError("grid with " + std::to_string(grid_.channels()) +
                     " channels cannot hold " + std::to_string(orientations) + " orientations");
  }
}

RotatingFilter RotateFilter(const RotatingFilter& filter, int steps) {
  const int n = filter.orientations();
  if (steps < 0 || steps >= n) {
    throw IndexError("rotation step " + std::to_string(steps) + " outside [0, " +
                     std::to_string(n) + ")");
  }
  if (steps == 0) return filter;

  const int ring_shift = steps * (8 / n);
  std::array<int, RotatingFilter::kTaps> destination{};
  destination[4] = 4;
  for (int j = 0; j < 8; ++j) destination[kBorderRing[j]] = kBorderRing[(j + ring_shift) % 8];

  RotatingFilter out(filter.out_channels(), filter.in_channels(), n);
  for (int o = 0; o < filter.out_channels(); ++o) {
    for (int c = 0; c < filter.in_channels(); ++c) {
      for (int ch = 0; ch < n; ++ch) {
        const int target = (ch + steps) % n;
        for (int t = 0; t < RotatingFilter::kTaps; ++t) {
          out.at(o, c, target, destination[t]) = filter.at(o, c, ch, t);
        }
      }
    }
  }
  return out;
}

OrientedFeatureGrid ArfConv(const OrientedFeatureGrid& x, const RotatingFilter& filter) {
  const int n = filter.orientations();
  if (x.orientations() != n) {
    throw ShapeError("input has " + std::to_string(x.orientations()) +
                     " orientation channels, filter has " + std::to_string(n));
  }
  if (x.base_channels() != filter.in_channels()) {
    throw ShapeError("input has " + std::to_string(x.base_channels()) +
                     " base channels, filter expects " + std::to_string(filter.in_channels()));
  }

  // Unroll every rotated copy into one ordinary kernel over all channels.
  ConvKernel kernel(filter.out_channels() * n, filter.in_channels() * n, RotatingFilter::kSize);
  for (int i = 0; i < n; ++i) {
    const RotatingFilter rotated = RotateFilter(filter, i);
    for (int o = 0; o < filter.out_channels(); ++o) {
      for (int c = 0; c < filter.in_channels(); ++c) {
        for (int ch = 0; ch < n; ++ch) {
          for (int t = 0; t < RotatingFilter::kTaps; ++t) {
            kernel.at(o * n + i, c * n + ch, t) = rotated.at(o, c, ch, t);
          }
        }
      }
    }
  }
  return OrientedFeatureGrid(Conv2dRef(x.grid(), kernel), n);
}

FeatureGrid OrientationPool(const OrientedFeatureGrid& x) {
  const FeatureGrid& in = x.grid();
  const int n = x.orientations();
  FeatureGrid out(in.height(), in.width(), x.base_channels(), in.stride());
  for (int y = 0; y < in.height(); ++y) {
    for (int xx = 0; xx < in.width(); ++xx) {
      const auto src = in.pixel(y, xx);
      auto dst = out.pixel(y, xx);
      for (int c = 0; c < x.base_channels(); ++c) {
        const auto first = src.begin() + static_cast<std::ptrdiff_t>(c) * n;
        dst[c] = *std::max_element(first, first + n);
      }
    }
  }
  return out;
}

}  // namespace orientdet
