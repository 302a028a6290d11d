// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "optic/geometry.hpp"
#include "optic/image.hpp"
#include "optic/result.hpp"

namespace optic {

/// A raw detector hit before it has been given a mark.
struct Detection {
  BoundingBox box;
  double score = 0.0;
  std::string phrase;
};

/// A detection registered under a numeric mark.
struct Candidate {
  int mark_id = 0;
  BoundingBox box;
  double score = 0.0;
  std::string phrase;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Registry of marked candidates for one image. Ids are exactly 1..N.
struct MarkSheet {
  std::vector<Candidate> candidates;
  ImageDims image_dims;

  std::size_t size() const noexcept { return candidates.size(); }
  bool empty() const noexcept { return candidates.empty(); }
};

/// Pools detections from every phrase into one numbering. Order is
/// descending score, then ascending x_min; the remaining corners and the
/// phrase only break exact ties so that the result never depends on the
/// input order.
inline Result<MarkSheet, InvalidBox> assign_marks(std::vector<Detection> detections,
                                                  const ImageDims& dims) {
  if (!dims.valid()) return fail(InvalidBox{"image dimensions must be positive"});
  for (const auto& d : detections) {
    if (!d.box.valid()) return fail(InvalidBox{"detection box is not a valid corner pair"});
    if (!inside(d.box, dims)) return fail(InvalidBox{"detection box lies outside the image"});
    if (!(d.score >= 0.0 && d.score <= 1.0))
      return fail(InvalidBox{"detection score outside [0, 1]"});
  }
  std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max, a.phrase) <
           std::tie(b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max, b.phrase);
  });
  MarkSheet sheet;
  sheet.image_dims = dims;
  sheet.candidates.reserve(detections.size());
  int next = 1;
  for (auto& d : detections) {
    sheet.candidates.push_back({next++, d.box, d.score, std::move(d.phrase)});
  }
  return sheet;
}

inline std::optional<Candidate> lookup(const MarkSheet& sheet, int mark_id) {
  if (mark_id < 1 || static_cast<std::size_t>(mark_id) > sheet.candidates.size())
    return std::nullopt;
  return sheet.candidates[static_cast<std::size_t>(mark_id) - 1];
}

// --- rendering ---

struct MarkStyle {
  int scale = 2;           // pixels per font cell
  int stroke_width = 2;
  int padding = 1;         // font cells around the digits
  bool draw_outlines = true;
  bool draw_badges = true;
  Rgb digit_color{255, 255, 255};
};

inline constexpr std::array<Rgb, 8> kMarkPalette = {{
    {230, 25, 75},
    {60, 160, 60},
    {0, 110, 200},
    {225, 110, 20},
    {145, 30, 180},
    {0, 128, 128},
    {200, 30, 190},
    {150, 95, 30},
}};

inline Rgb mark_color(int mark_id) noexcept {
  const int i = ((mark_id - 1) % 8 + 8) % 8;
  return kMarkPalette[static_cast<std::size_t>(i)];
}

namespace detail {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

// 5x7 digits, one byte per row, bit 4 is the leftmost column.
inline constexpr std::uint8_t kDigitGlyphs[10][kGlyphHeight] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
};

inline bool glyph_bit(int digit, int col, int row) noexcept {
  return (kDigitGlyphs[digit][row] >> (kGlyphWidth - 1 - col)) & 1;
}

inline void fill_rect(RasterImage& img, int x0, int y0, int x1, int y1, Rgb c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width());
  y1 = std::min(y1, img.height());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set(x, y, c);
}

}  // namespace detail

/// Pixel rectangle [x, x + width) x [y, y + height), possibly extending past
/// the image edges.
struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Where the id badge for a candidate goes, before clipping.
inline PixelRect badge_rect(const Candidate& c, const MarkStyle& style) {
  const int digits = static_cast<int>(std::to_string(c.mark_id).size());
  const int scale = std::max(style.scale, 1);
  const int text_w = digits * detail::kGlyphWidth + (digits - 1);
  const int w = (text_w + 2 * style.padding) * scale;
  const int h = (detail::kGlyphHeight + 2 * style.padding) * scale;
  const Point mid = center(c.box);
  return {static_cast<int>(std::lround(mid.x - w / 2.0)),
          static_cast<int>(std::lround(mid.y - h / 2.0)), w, h};
}

namespace detail {

inline void draw_outline(RasterImage& img, const BoundingBox& box, int stroke, Rgb color) {
  const int x0 = static_cast<int>(std::floor(box.x_min));
  const int y0 = static_cast<int>(std::floor(box.y_min));
  const int x1 = std::max(x0 + 1, static_cast<int>(std::ceil(box.x_max)));
  const int y1 = std::max(y0 + 1, static_cast<int>(std::ceil(box.y_max)));
  const int s = std::max(stroke, 1);
  fill_rect(img, x0, y0, x1, std::min(y0 + s, y1), color);
  fill_rect(img, x0, std::max(y1 - s, y0), x1, y1, color);
  fill_rect(img, x0, y0, std::min(x0 + s, x1), y1, color);
  fill_rect(img, std::max(x1 - s, x0), y0, x1, y1, color);
}

inline void draw_badge(RasterImage& img, const Candidate& c, const MarkStyle& style) {
  const PixelRect r = badge_rect(c, style);
  const int scale = std::max(style.scale, 1);
  fill_rect(img, r.x, r.y, r.x + r.width, r.y + r.height, mark_color(c.mark_id));
  const std::string text = std::to_string(c.mark_id);
  int gx = r.x + style.padding * scale;
  const int gy = r.y + style.padding * scale;
  for (char ch : text) {
    const int digit = ch - '0';
    for (int row = 0; row < kGlyphHeight; ++row) {
      for (int col = 0; col < kGlyphWidth; ++col) {
        if (!glyph_bit(digit, col, row)) continue;
        fill_rect(img, gx + col * scale, gy + row * scale, gx + (col + 1) * scale,
                  gy + (row + 1) * scale, style.digit_color);
      }
    }
    gx += (kGlyphWidth + 1) * scale;
  }
}

}  // namespace detail

/// Draws every outline, then every badge in ascending id order, onto a copy
/// of the image. Badges that do not fit are clipped at the image border.
inline RasterImage render_marked(const RasterImage& image, const MarkSheet& sheet,
                                 const MarkStyle& style = {}) {
  RasterImage out = image;
  if (style.draw_outlines) {
    for (const auto& c : sheet.candidates)
      detail::draw_outline(out, c.box, style.stroke_width, mark_color(c.mark_id));
  }
  if (style.draw_badges) {
    for (const auto& c : sheet.candidates) detail::draw_badge(out, c, style);
  }
  return out;
}

/// Outlines only, no badges.
inline RasterImage render_boxes(const RasterImage& image, const MarkSheet& sheet,
                                MarkStyle style = {}) {
  style.draw_outlines = true;
  style.draw_badges = false;
  return render_marked(image, sheet, style);
}

}  // namespace optic
