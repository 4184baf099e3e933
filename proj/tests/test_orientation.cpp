#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "orientdet/error.hpp"
#include "orientdet/orientation.hpp"

namespace {

using namespace orientdet;

RotatingFilter RandomFilter(std::mt19937_64& rng, int out, int in, int n) {
  RotatingFilter f(out, in, n);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : f.weights()) v = u(rng);
  return f;
}

// Spatial quarter turn clockwise in image coordinates: (row r, col c) -> (row c, col H-1-r).
FeatureGrid RotateGridClockwise(const FeatureGrid& g) {
  FeatureGrid out(g.width(), g.height(), g.channels(), g.stride());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      for (int ch = 0; ch < g.channels(); ++ch) out.at(c, g.height() - 1 - r, ch) = g.at(r, c, ch);
    }
  }
  return out;
}

// Orientation channel n of every base channel moves to (n + 1) % N.
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

TEST(RotatingFilter, ValidatesShape) {
  EXPECT_THROW(RotatingFilter(1, 1, 3), ShapeError);
  EXPECT_THROW(RotatingFilter(0, 1, 4), ShapeError);
  EXPECT_NO_THROW(RotatingFilter(1, 1, 8));
}

TEST(RotateFilter, StepOutOfRangeThrows) {
  const RotatingFilter f(1, 1, 4);
  EXPECT_THROW(RotateFilter(f, 4), IndexError);
  EXPECT_THROW(RotateFilter(f, -1), IndexError);
}

TEST(RotateFilter, ZeroStepsIsIdentity) {
  std::mt19937_64 rng(31);
  const RotatingFilter f = RandomFilter(rng, 2, 3, 8);
  EXPECT_EQ(RotateFilter(f, 0), f);
}

TEST(RotateFilter, ComposingNTimesIsIdentity) {
  std::mt19937_64 rng(32);
  for (int n : {1, 2, 4, 8}) {
    const RotatingFilter f = RandomFilter(rng, 2, 3, n);
    RotatingFilter g = f;
    for (int i = 0; i < n; ++i) g = RotateFilter(g, n > 1 ? 1 : 0);
    EXPECT_EQ(g, f) << n;
  }
}

TEST(RotateFilter, StepsCompose) {
  std::mt19937_64 rng(33);
  const RotatingFilter f = RandomFilter(rng, 2, 2, 8);
  EXPECT_EQ(RotateFilter(RotateFilter(f, 2), 3), RotateFilter(f, 5));
}

TEST(RotateFilter, QuarterTurnMatchesSpatialRotation) {
  std::mt19937_64 rng(34);
  const RotatingFilter f = RandomFilter(rng, 1, 1, 4);
  const RotatingFilter r = RotateFilter(f, 1);
  for (int n = 0; n < 4; ++n) {
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        EXPECT_EQ(r.at(0, 0, (n + 1) % 4, col * 3 + (2 - row)), f.at(0, 0, n, row * 3 + col));
      }
    }
  }
}

TEST(RotateFilter, EighthTurnKeepsCenter) {
  std::mt19937_64 rng(35);
  const RotatingFilter f = RandomFilter(rng, 1, 1, 8);
  const RotatingFilter r = RotateFilter(f, 1);
  for (int n = 0; n < 8; ++n) {
    EXPECT_EQ(r.at(0, 0, (n + 1) % 8, 4), f.at(0, 0, n, 4));
    // Top-left moves one step clockwise to top-centre.
    EXPECT_EQ(r.at(0, 0, (n + 1) % 8, 1), f.at(0, 0, n, 0));
  }
}

TEST(ArfConv, SingleOrientationIsPlainConvolution) {
  std::mt19937_64 rng(36);
  const RotatingFilter f = RandomFilter(rng, 3, 2, 1);
  const FeatureGrid g = oracle::RandomGrid(rng, 5, 5, 2);
  ConvKernel k(3, 2);
  for (int o = 0; o < 3; ++o) {
    for (int c = 0; c < 2; ++c) {
      for (int t = 0; t < 9; ++t) k.at(o, c, t) = f.at(o, c, 0, t);
    }
  }
  const OrientedFeatureGrid out = ArfConv(OrientedFeatureGrid(g, 1), f);
  EXPECT_LE(oracle::MaxAbsDiff(out.grid(), oracle::NaiveConv(g, k)), 1e-12);
}

TEST(ArfConv, QuarterTurnEquivariance) {
  std::mt19937_64 rng(37);
  const int n = 4;
  for (int trial = 0; trial < 5; ++trial) {
    const RotatingFilter f = RandomFilter(rng, 2, 3, n);
    const FeatureGrid x = oracle::RandomGrid(rng, 8, 8, 3 * n);
    const FeatureGrid lhs = ArfConv(OrientedFeatureGrid(ShiftOrientations(RotateGridClockwise(x), n), n), f).grid();
    const FeatureGrid rhs = ShiftOrientations(RotateGridClockwise(ArfConv(OrientedFeatureGrid(x, n), f).grid()), n);
    EXPECT_LE(oracle::MaxAbsDiff(lhs, rhs), 1e-10);
  }
}

TEST(ArfConv, OutputShape) {
  const OrientedFeatureGrid out = ArfConv(OrientedFeatureGrid(FeatureGrid(4, 5, 16), 8), RotatingFilter(3, 2, 8));
  EXPECT_EQ(out.grid().channels(), 24);
  EXPECT_EQ(out.orientations(), 8);
  EXPECT_THROW(ArfConv(OrientedFeatureGrid(FeatureGrid(4, 5, 16), 8), RotatingFilter(3, 3, 8)), ShapeError);
  EXPECT_THROW(ArfConv(OrientedFeatureGrid(FeatureGrid(4, 5, 16), 4), RotatingFilter(3, 4, 8)), ShapeError);
}

TEST(OrientationPool, ShapeAndMaxDominance) {
  std::mt19937_64 rng(38);
  const FeatureGrid x = oracle::RandomGrid(rng, 3, 4, 256);
  const FeatureGrid p = OrientationPool(OrientedFeatureGrid(x, 8));
  EXPECT_EQ(p.channels(), 32);
  for (int y = 0; y < 3; ++y) {
    for (int xx = 0; xx < 4; ++xx) {
      for (int c = 0; c < 32; ++c) {
        bool attained = false;
        for (int n = 0; n < 8; ++n) {
          ASSERT_GE(p.at(y, xx, c), x.at(y, xx, c * 8 + n));
          attained |= p.at(y, xx, c) == x.at(y, xx, c * 8 + n);
        }
        ASSERT_TRUE(attained);
      }
    }
  }
}

TEST(OrientationPool, InvariantToCyclicShift) {
  std::mt19937_64 rng(39);
  FeatureGrid x = oracle::RandomGrid(rng, 3, 3, 32);
  const FeatureGrid p = OrientationPool(OrientedFeatureGrid(x, 8));
  for (int s = 0; s < 8; ++s) {
    x = ShiftOrientations(x, 8);
    EXPECT_EQ(OrientationPool(OrientedFeatureGrid(x, 8)).values(), p.values());
  }
}

TEST(OrientedFeatureGrid, RejectsIndivisibleChannels) {
  EXPECT_THROW(OrientedFeatureGrid(FeatureGrid(2, 2, 6), 4), ShapeError);
}

}  // namespace
