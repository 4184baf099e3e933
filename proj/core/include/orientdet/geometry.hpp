#pragma once

// Oriented boxes, quadrilaterals and rotated IoU.
//
// Box convention: (cx, cy) is the center in image pixels (x to the right,
// y down), w is the long side, h the short side, and theta the angle from the
// +x axis to the long side. The long-side axis is (cos theta, sin theta) and
// the short-side axis is (-sin theta, cos theta). Canonical boxes satisfy
// w >= h and theta in [-pi/4, 3pi/4).

#include <array>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace orientdet {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double Cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double Dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }

// Rotates `v` by `theta` in the image frame: (1, 0) maps to (cos, sin).
Point2 Rotate(Point2 v, double theta);

inline constexpr double kPi = std::numbers::pi;
// Lower end of the half-open canonical angle interval [-pi/4, 3pi/4).
inline constexpr double kAngleLow = -kPi / 4.0;
inline constexpr double kAngleHigh = 3.0 * kPi / 4.0;

struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double theta = 0.0;

  Point2 center() const { return {cx, cy}; }
  double area() const { return w * h; }
  friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

// Wraps an angle into [-pi/4, 3pi/4) by adding an integer multiple of pi.
double WrapHalfTurn(double theta);

// Returns the canonical representative of `box` (same corner set, w >= h,
// theta in [-pi/4, 3pi/4)). Throws InvalidBoxError for non-positive sides or
// non-finite fields.
OrientedBox Canonicalize(const OrientedBox& box);
bool IsCanonical(const OrientedBox& box);

// Four vertices with counter-clockwise winding (positive shoelace area in
// the numeric x/y frame). Construction reorders clockwise input.
class Quad {
 public:
  Quad() = default;
  explicit Quad(const std::array<Point2, 4>& vertices);

  const std::array<Point2, 4>& vertices() const { return vertices_; }
  const Point2& operator[](std::size_t i) const { return vertices_[i]; }
  double SignedArea() const;

 private:
  std::array<Point2, 4> vertices_{};
};

// Counter-clockwise convex polygon. Empty when the intersection vanished.
struct ConvexPolygon {
  std::vector<Point2> vertices;

  bool empty() const { return vertices.size() < 3; }
};

// Shoelace signed area; positive for counter-clockwise polygons.
double SignedArea(std::span<const Point2> polygon);

// Andrew's monotone chain; returns the hull counter-clockwise without
// collinear points.
ConvexPolygon ConvexHull(std::span<const Point2> points);

// Sutherland-Hodgman clipping of one convex CCW polygon against another.
// Vertices closer than `merge_eps` are merged; a result with area below
// `min_area` is returned empty.
ConvexPolygon ClipConvex(std::span<const Point2> subject, std::span<const Point2> clip,
                         double merge_eps, double min_area);

// Corners are center + Rotate((+-w/2, +-h/2), theta), starting at
// (-w/2, -h/2) and running counter-clockwise.
Quad BoxToQuad(const OrientedBox& box);

// Largest corner deviation for which a quad still counts as a rectangle,
// e.g. one written with coordinates rounded to two decimals.
inline constexpr double kRectangleFitTolerance = 0.05;

// Least-squares rectangle through four corners given in boundary order
// (either direction, any starting corner). Empty when some corner deviates
// from the fit by more than `tolerance` or the fit is thinner than it.
std::optional<OrientedBox> FitRectangle(const Quad& quad, double tolerance = kRectangleFitTolerance);

// Near-rectangular quads go through FitRectangle; any other quad gets its
// minimum-area enclosing rectangle (rotating calipers over the convex hull).
// Canonicalized. Throws ZeroAreaError for collinear input.
OrientedBox QuadToBox(const Quad& quad);

// Minimum-area enclosing rectangle for an arbitrary point set.
OrientedBox MinAreaRect(std::span<const Point2> points);

// Area of the intersection of two boxes.
double IntersectionArea(const OrientedBox& a, const OrientedBox& b);

// Intersection over union in [0, 1]. Symmetric. Zero-area operands give 0.
double RotatedIoU(const OrientedBox& a, const OrientedBox& b);

struct AxisAlignedBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;
  friend bool operator==(const AxisAlignedBox&, const AxisAlignedBox&) = default;
};

AxisAlignedBox AxisAlignedHull(const OrientedBox& box);

}  // namespace orientdet
