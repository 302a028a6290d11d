// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <string>

#include "optic/result.hpp"

namespace optic {

struct InvalidBox {
  std::string message;
};

/// Image size in pixels. Both sides must be at least 1.
struct ImageDims {
  int width = 0;
  int height = 0;

  bool valid() const noexcept { return width >= 1 && height >= 1; }
  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Axis-aligned box in pixel space, stored as a corner pair.
///
/// This is the only box representation used inside the library. The
/// corner+size form found in annotation files and model replies, and the
/// normalized center form spoken by detectors, are converted at the edges
/// (from_xywh, from_normalized_center).
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool valid() const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
  }
  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
  friend std::ostream& operator<<(std::ostream& os, const BoundingBox& b) {
    return os << "(" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << ")";
  }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Intersection over union. Zero when the union has no area, which includes
/// two coincident degenerate boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline Point center(const BoundingBox& b) noexcept {
  return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
}

/// Top-left corner plus width and height.
inline Result<BoundingBox, InvalidBox> from_xywh(double x, double y, double w, double h) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h))
    return fail(InvalidBox{"non-finite box component"});
  if (w < 0.0 || h < 0.0) return fail(InvalidBox{"negative width or height"});
  return BoundingBox{x, y, x + w, y + h};
}

inline std::array<double, 4> to_xywh(const BoundingBox& b) noexcept {
  return {b.x_min, b.y_min, b.width(), b.height()};
}

inline bool inside(const BoundingBox& b, const ImageDims& dims) noexcept {
  return b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= dims.width && b.y_max <= dims.height;
}

inline BoundingBox clamp_to(const BoundingBox& b, const ImageDims& dims) noexcept {
  const double w = dims.width;
  const double h = dims.height;
  return {std::clamp(b.x_min, 0.0, w), std::clamp(b.y_min, 0.0, h), std::clamp(b.x_max, 0.0, w),
          std::clamp(b.y_max, 0.0, h)};
}

/// Normalized (cx, cy, w, h) in [0,1] to a pixel corner box clamped to the
/// image.
inline Result<BoundingBox, InvalidBox> from_normalized_center(double cx, double cy, double w,
                                                              double h, const ImageDims& dims) {
  if (!dims.valid()) return fail(InvalidBox{"image dimensions must be positive"});
  for (double v : {cx, cy, w, h}) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      return fail(InvalidBox{"normalized box component outside [0, 1]"});
  }
  const double W = dims.width;
  const double H = dims.height;
  const BoundingBox raw{(cx - w / 2.0) * W, (cy - h / 2.0) * H, (cx + w / 2.0) * W,
                        (cy + h / 2.0) * H};
  return clamp_to(raw, dims);
}

}  // namespace optic
