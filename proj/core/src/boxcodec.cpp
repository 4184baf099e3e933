#include "orientdet/boxcodec.hpp"

#include <cmath>

#include "orientdet/error.hpp"

namespace orientdet {

namespace {

void RequireAnchor(const OrientedBox& anchor) {
  if (!(anchor.w > 0.0) || !(anchor.h > 0.0) || !std::isfinite(anchor.w) ||
      !std::isfinite(anchor.h) || !std::isfinite(anchor.cx) || !std::isfinite(anchor.cy) ||
      !std::isfinite(anchor.theta)) {
    throw InvalidBoxError("anchor must have finite fields and positive sides");
  }
}

}  // namespace

BoxDelta Encode(const OrientedBox& gt, const OrientedBox& anchor) {
  RequireAnchor(anchor);
  if (!(gt.w > 0.0) || !(gt.h > 0.0) || !std::isfinite(gt.cx) || !std::isfinite(gt.cy) ||
      !std::isfinite(gt.theta)) {
    throw InvalidBoxError("target box must have finite fields and positive sides");
  }

  // Project the center offset onto the anchor's long and short axes.
  const Point2 local = Rotate(gt.center() - anchor.center(), -anchor.theta);

  BoxDelta d;
  d.dx = local.x / anchor.w;
  d.dy = local.y / anchor.h;
  d.dw = std::log(gt.w / anchor.w);
  d.dh = std::log(gt.h / anchor.h);
  d.dtheta = WrapHalfTurn(gt.theta - anchor.theta) / kPi;
  // The division can round onto the open upper end.
  if (d.dtheta >= 0.75) d.dtheta = std::nextafter(0.75, 0.0);
  if (d.dtheta < -0.25) d.dtheta = -0.25;
  return d;
}

DecodedBox Decode(const BoxDelta& delta, const OrientedBox& anchor, const DecodeOptions& options) {
  RequireAnchor(anchor);
  if (!std::isfinite(delta.dx) || !std::isfinite(delta.dy) || !std::isfinite(delta.dw) ||
      !std::isfinite(delta.dh) || !std::isfinite(delta.dtheta)) {
    throw InvalidBoxError("box delta has a non-finite component");
  }

  DecodedBox out;
  const double limit = options.max_log_ratio;
  double dw = delta.dw;
  double dh = delta.dh;
  if (std::abs(dw) > limit) {
    dw = std::copysign(limit, dw);
    out.clamped = true;
  }
  if (std::abs(dh) > limit) {
    dh = std::copysign(limit, dh);
    out.clamped = true;
  }

  const Point2 offset = Rotate({delta.dx * anchor.w, delta.dy * anchor.h}, anchor.theta);
  OrientedBox raw;
  raw.cx = anchor.cx + offset.x;
  raw.cy = anchor.cy + offset.y;
  raw.w = anchor.w * std::exp(dw);
  raw.h = anchor.h * std::exp(dh);
  raw.theta = anchor.theta + delta.dtheta * kPi;
  out.box = Canonicalize(raw);
  return out;
}

}  // namespace orientdet
