#pragma once

// Active rotating filters on a 3x3 support.
//
// A filter carries N orientation channels per input channel. Rotating it by
// i steps (i * 2pi/N, clockwise on screen) shifts the 8 border taps of every
// 3x3 slice by i * 8/N ring positions and cyclically shifts the orientation
// channels by i. Orientation channel n of base channel c lives at grid
// channel c * N + n.

#include <array>
#include <vector>

#include "orientdet/featops.hpp"

namespace orientdet {

class RotatingFilter {
 public:
  static constexpr int kSize = 3;
  static constexpr int kTaps = kSize * kSize;

  RotatingFilter() = default;
  // Throws ShapeError unless orientations is 1, 2, 4 or 8.
  RotatingFilter(int out_channels, int in_channels, int orientations = 8);

  int out_channels() const { return out_; }
  int in_channels() const { return in_; }
  int orientations() const { return n_; }

  double& at(int o, int c, int n, int tap) { return weights_[Index(o, c, n, tap)]; }
  double at(int o, int c, int n, int tap) const { return weights_[Index(o, c, n, tap)]; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  friend bool operator==(const RotatingFilter&, const RotatingFilter&) = default;

 private:
  std::size_t Index(int o, int c, int n, int tap) const {
    return ((static_cast<std::size_t>(o) * in_ + c) * n_ + n) * kTaps + tap;
  }

  int out_ = 0;
  int in_ = 0;
  int n_ = 0;
  std::vector<double> weights_;
};

// Clockwise border ring of a 3x3 kernel in tap indices, starting top-left.
inline constexpr std::array<int, 8> kBorderRing = {0, 1, 2, 5, 8, 7, 6, 3};

class OrientedFeatureGrid {
 public:
  OrientedFeatureGrid() = default;
  // Throws ShapeError unless grid.channels() is divisible by orientations.
  OrientedFeatureGrid(FeatureGrid grid, int orientations);

  const FeatureGrid& grid() const { return grid_; }
  FeatureGrid& grid() { return grid_; }
  int orientations() const { return n_; }
  int base_channels() const { return grid_.channels() / n_; }

 private:
  FeatureGrid grid_;
  int n_ = 1;
};

// Throws IndexError unless 0 <= steps < N.
RotatingFilter RotateFilter(const RotatingFilter& filter, int steps);

// Y^(i) = sum_n RotateFilter(F, i)^(n) * X^(n) for every output orientation i.
OrientedFeatureGrid ArfConv(const OrientedFeatureGrid& x, const RotatingFilter& filter);

// Element-wise max over the N orientation channels of every base channel.
FeatureGrid OrientationPool(const OrientedFeatureGrid& x);

}  // namespace orientdet
