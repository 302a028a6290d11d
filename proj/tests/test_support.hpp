// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optic/optic.hpp"

namespace optic::testing {

inline const std::filesystem::path kSourceDir = OPTIC_SOURCE_DIR;
inline const std::filesystem::path kFixtureDir = OPTIC_FIXTURE_DIR;

/// Exact IoU of two integer boxes by counting unit cells on the grid.
inline double grid_iou(int ax0, int ay0, int ax1, int ay1, int bx0, int by0, int bx1, int by1,
                       int grid = 64) {
  long in_a = 0, in_b = 0, both = 0;
  for (int y = 0; y < grid; ++y) {
    for (int x = 0; x < grid; ++x) {
      const bool a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
      const bool b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
      in_a += a;
      in_b += b;
      both += a && b;
    }
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

inline bool near_box(const BoundingBox& a, const BoundingBox& b) {
  constexpr double tol = 1e-9;
  return std::abs(a.x_min - b.x_min) <= tol && std::abs(a.y_min - b.y_min) <= tol &&
         std::abs(a.x_max - b.x_max) <= tol && std::abs(a.y_max - b.y_max) <= tol;
}

/// Deterministic gradient image.
inline RasterImage gradient_image(int width, int height) {
  RasterImage img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      img.set(x, y, {static_cast<std::uint8_t>(x * 255 / std::max(width - 1, 1)),
                     static_cast<std::uint8_t>(y * 255 / std::max(height - 1, 1)),
                     static_cast<std::uint8_t>((x + y) % 256)});
  return img;
}

inline LoadedImage loaded_png(const RasterImage& raster) {
  auto png = encode_png(raster);
  return LoadedImage{raster, png.value(), MediaType::png};
}

inline nlohmann::ordered_json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  return nlohmann::ordered_json::parse(in);
}

/// Scripted backends for the left-chair walkthrough: one "Chair" subject,
/// the two-chair detector fixture, and a visual answer of [2].
inline nlohmann::ordered_json fig4_script(const std::string& visual_reply = R"({"Subject": [2]})") {
  return {{"text_grounder", {R"({"Subject": "Chair"})"}},
          {"detector", {read_json(kFixtureDir / "detector" / "two_chairs.json")}},
          {"visual_grounder", {visual_reply}}};
}

inline GroundingRequest fig4_request(std::string query = "Please help me find the left chair.") {
  return {loaded_png(gradient_image(640, 480)), std::move(query), PipelineConfig{}};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("optic_test_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace optic::testing
