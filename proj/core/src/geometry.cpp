#include "orientdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "orientdet/error.hpp"

namespace orientdet {

namespace {

// Merge distance and empty-area floor, relative to the operands' size.
constexpr double kRelativeMergeEps = 1e-9;
constexpr double kRelativeMinArea = 1e-12;

void RequireFinite(const OrientedBox& b) {
  if (!std::isfinite(b.cx) || !std::isfinite(b.cy) || !std::isfinite(b.w) ||
      !std::isfinite(b.h) || !std::isfinite(b.theta)) {
    throw InvalidBoxError("oriented box has a non-finite field");
  }
}

std::vector<Point2> MergeClose(const std::vector<Point2>& in, double eps) {
  std::vector<Point2> out;
  out.reserve(in.size());
  const double eps2 = eps * eps;
  for (const Point2& p : in) {
    if (!out.empty()) {
      const Point2 d = p - out.back();
      if (Dot(d, d) <= eps2) continue;
    }
    out.push_back(p);
  }
  while (out.size() > 1) {
    const Point2 d = out.front() - out.back();
    if (Dot(d, d) > eps2) break;
    out.pop_back();
  }
  return out;
}

}  // namespace

Point2 Rotate(Point2 v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double WrapHalfTurn(double theta) {
  double r = theta - kPi * std::floor((theta - kAngleLow) / kPi);
  // floor() can land one period off when theta sits on a boundary.
  if (r >= kAngleHigh) r -= kPi;
  if (r < kAngleLow) r += kPi;
  return r;
}

OrientedBox Canonicalize(const OrientedBox& box) {
  RequireFinite(box);
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    throw InvalidBoxError("oriented box sides must be positive (w=" + std::to_string(box.w) +
                          ", h=" + std::to_string(box.h) + ")");
  }
  OrientedBox out = box;
  if (out.w < out.h) {
    std::swap(out.w, out.h);
    out.theta += kPi / 2.0;
  }
  out.theta = WrapHalfTurn(out.theta);
  return out;
}

bool IsCanonical(const OrientedBox& box) {
  return std::isfinite(box.cx) && std::isfinite(box.cy) && box.w > 0.0 && box.h > 0.0 &&
         std::isfinite(box.w) && box.w >= box.h && box.theta >= kAngleLow &&
         box.theta < kAngleHigh;
}

Quad::Quad(const std::array<Point2, 4>& vertices) : vertices_(vertices) {
  if (SignedArea() < 0.0) std::swap(vertices_[1], vertices_[3]);
}

double Quad::SignedArea() const { return orientdet::SignedArea(vertices_); }

double SignedArea(std::span<const Point2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    twice += Cross(polygon[i], polygon[(i + 1) % n]);
  }
  return 0.5 * twice;
}

ConvexPolygon ConvexHull(std::span<const Point2> points) {
  std::vector<Point2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(),
            [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return {pts};

  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && Cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Point2& p = pts[i];
    while (k >= lower && Cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return {hull};
}

ConvexPolygon ClipConvex(std::span<const Point2> subject, std::span<const Point2> clip,
                         double merge_eps, double min_area) {
  std::vector<Point2> poly(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  if (poly.size() < 3 || m < 3) return {};

  std::vector<Point2> next;
  for (std::size_t e = 0; e < m && poly.size() >= 3; ++e) {
    const Point2 a = clip[e];
    const Point2 edge = clip[(e + 1) % m] - a;
    const double edge_len = std::sqrt(Dot(edge, edge));
    if (edge_len <= merge_eps) continue;
    // Points within merge_eps of the supporting line count as inside.
    const double tol = merge_eps * edge_len;

    next.clear();
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 cur = poly[i];
      const Point2 nxt = poly[(i + 1) % n];
      const double dc = Cross(edge, cur - a);
      const double dn = Cross(edge, nxt - a);
      const bool cur_in = dc >= -tol;
      const bool nxt_in = dn >= -tol;
      if (cur_in) next.push_back(cur);
      if (cur_in != nxt_in) {
        const double t = dc / (dc - dn);
        next.push_back(cur + t * (nxt - cur));
      }
    }
    poly = MergeClose(next, merge_eps);
  }
  if (poly.size() < 3 || std::abs(SignedArea(poly)) < min_area) return {};
  return {poly};
}

Quad BoxToQuad(const OrientedBox& box) {
  const double hw = 0.5 * box.w;
  const double hh = 0.5 * box.h;
  const Point2 c = box.center();
  return Quad({c + Rotate({-hw, -hh}, box.theta), c + Rotate({hw, -hh}, box.theta),
               c + Rotate({hw, hh}, box.theta), c + Rotate({-hw, hh}, box.theta)});
}

OrientedBox MinAreaRect(std::span<const Point2> points) {
  const ConvexPolygon hull = ConvexHull(points);
  double scale = 0.0;
  for (const Point2& p : hull.vertices) {
    for (const Point2& q : hull.vertices) {
      scale = std::max({scale, std::abs(p.x - q.x), std::abs(p.y - q.y)});
    }
  }
  if (hull.empty() || !(std::abs(SignedArea(hull.vertices)) > kRelativeMinArea * scale * scale)) {
    throw ZeroAreaError("point set is degenerate (collinear or coincident)");
  }

  const auto& v = hull.vertices;
  const std::size_t n = v.size();
  double best_area = std::numeric_limits<double>::infinity();
  OrientedBox best;
  for (std::size_t i = 0; i < n; ++i) {
    Point2 u = v[(i + 1) % n] - v[i];
    const double len = std::sqrt(Dot(u, u));
    if (len == 0.0) continue;
    u = (1.0 / len) * u;
    const Point2 perp{-u.y, u.x};
    double umin = 0.0, umax = 0.0, vmin = 0.0, vmax = 0.0;
    for (const Point2& p : v) {
      const Point2 d = p - v[i];
      const double pu = Dot(d, u);
      const double pv = Dot(d, perp);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double area = (umax - umin) * (vmax - vmin);
    // Ties keep the first edge so the result is deterministic.
    if (area < best_area * (1.0 - 1e-12)) {
      best_area = area;
      const Point2 c = v[i] + (0.5 * (umin + umax)) * u + (0.5 * (vmin + vmax)) * perp;
      best = {c.x, c.y, umax - umin, vmax - vmin, std::atan2(u.y, u.x)};
    }
  }
  return Canonicalize(best);
}

namespace {

// Corner order of BoxToQuad: (-,-), (+,-), (+,+), (-,+) in box coordinates.
constexpr double kSignX[4] = {-1, 1, 1, -1};
constexpr double kSignY[4] = {-1, -1, 1, 1};

std::optional<OrientedBox> FitOrdered(const std::array<Point2, 4>& q, double tolerance) {
  Point2 c{};
  for (const Point2& p : q) c = c + 0.25 * p;
  Point2 x{}, y{};
  for (int i = 0; i < 4; ++i) {
    x = x + (0.25 * kSignX[i]) * (q[i] - c);
    y = y + (0.25 * kSignY[i]) * (q[i] - c);
  }
  // With the half-sides eliminated, the best direction u maximizes
  // (x.u)^2 + (y.v)^2 where v is u turned a quarter; that is the top
  // eigenvector of x x^T + z z^T with z = y turned back.
  const Point2 z{y.y, -y.x};
  const double mxx = x.x * x.x + z.x * z.x;
  const double myy = x.y * x.y + z.y * z.y;
  const double mxy = x.x * x.y + z.x * z.y;
  double theta = 0.5 * std::atan2(2.0 * mxy, mxx - myy);
  const Point2 u{std::cos(theta), std::sin(theta)};
  double a = Dot(x, u);
  double b = Dot(y, Point2{-u.y, u.x});
  if (a < 0.0) {
    a = -a;
    b = -b;
    theta += std::numbers::pi;
  }
  if (!(2.0 * a > tolerance) || !(2.0 * b > tolerance)) return std::nullopt;
  const OrientedBox box{c.x, c.y, 2.0 * a, 2.0 * b, theta};
  const Quad fitted = BoxToQuad(box);
  for (int i = 0; i < 4; ++i) {
    const Point2 d = fitted[i] - q[i];
    if (!(std::max(std::abs(d.x), std::abs(d.y)) <= tolerance)) return std::nullopt;
  }
  return Canonicalize(box);
}

}  // namespace

std::optional<OrientedBox> FitRectangle(const Quad& quad, double tolerance) {
  const auto& p = quad.vertices();
  for (const Point2& v : p) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) return std::nullopt;
  }
  if (auto box = FitOrdered(p, tolerance)) return box;
  return FitOrdered({p[0], p[3], p[2], p[1]}, tolerance);
}

OrientedBox QuadToBox(const Quad& quad) {
  if (auto box = FitRectangle(quad)) return *box;
  return MinAreaRect(quad.vertices());
}

double IntersectionArea(const OrientedBox& a, const OrientedBox& b) {
  if (!(a.w > 0.0) || !(a.h > 0.0) || !(b.w > 0.0) || !(b.h > 0.0)) return 0.0;
  const double scale = std::max({a.w, a.h, b.w, b.h});
  const Quad qa = BoxToQuad(a);
  const Quad qb = BoxToQuad(b);
  const ConvexPolygon inter =
      ClipConvex(qa.vertices(), qb.vertices(), kRelativeMergeEps * scale,
                 kRelativeMinArea * scale * scale);
  if (inter.empty()) return 0.0;
  return std::abs(SignedArea(inter.vertices));
}

double RotatedIoU(const OrientedBox& a, const OrientedBox& b) {
  const double area_a = a.w * a.h;
  const double area_b = b.w * b.h;
  if (!(area_a > 0.0) || !(area_b > 0.0)) return 0.0;
  if (a == b) return 1.0;
  // Cheap rejection on center distance against the circumradii.
  const double dx = a.cx - b.cx;
  const double dy = a.cy - b.cy;
  const double reach = 0.5 * (std::hypot(a.w, a.h) + std::hypot(b.w, b.h));
  if (dx * dx + dy * dy > reach * reach) return 0.0;

  const double inter = std::min({IntersectionArea(a, b), area_a, area_b});
  const double uni = area_a + area_b - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

AxisAlignedBox AxisAlignedHull(const OrientedBox& box) {
  const Quad q = BoxToQuad(box);
  AxisAlignedBox out{q[0].x, q[0].y, q[0].x, q[0].y};
  for (const Point2& p : q.vertices()) {
    out.xmin = std::min(out.xmin, p.x);
    out.ymin = std::min(out.ymin, p.y);
    out.xmax = std::max(out.xmax, p.x);
    out.ymax = std::max(out.ymax, p.y);
  }
  return out;
}

}  // namespace orientdet
