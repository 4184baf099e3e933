#pragma once

#include "orientdet/geometry.hpp"

namespace orientdet {

// Regression target of a box relative to an anchor.
//   (dx, dy)  center offset expressed in the anchor frame, divided by (w, h)
//   (dw, dh)  log side ratios
//   dtheta    angle difference wrapped into [-pi/4, 3pi/4), divided by pi
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
  double dtheta = 0.0;

  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

struct DecodeOptions {
  // |dw| and |dh| are clamped to this before exponentiation.
  double max_log_ratio = 8.0;
};

struct DecodedBox {
  OrientedBox box;
  bool clamped = false;
};

// Throws InvalidBoxError if an anchor side is non-positive or any field is
// non-finite. The returned dtheta is always in [-1/4, 3/4).
BoxDelta Encode(const OrientedBox& gt, const OrientedBox& anchor);

// Inverse of Encode followed by Canonicalize. Throws InvalidBoxError for an
// invalid anchor or a non-finite delta.
DecodedBox Decode(const BoxDelta& delta, const OrientedBox& anchor,
                  const DecodeOptions& options = {});

}  // namespace orientdet
