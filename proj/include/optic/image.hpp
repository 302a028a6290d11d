// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "optic/geometry.hpp"
#include "optic/result.hpp"

namespace optic {

using Bytes = std::vector<std::uint8_t>;

struct ImageError {
  std::string message;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB, row-major, no padding.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Rgb fill = {})
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * 3) {
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
    }
  }
  RasterImage(int width, int height, Bytes rgb)
      : width_(width), height_(height), pixels_(std::move(rgb)) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  ImageDims dims() const noexcept { return {width_, height_}; }
  bool empty() const noexcept { return pixels_.empty(); }
  bool valid() const noexcept {
    return width_ >= 1 && height_ >= 1 &&
           pixels_.size() == static_cast<std::size_t>(width_) * height_ * 3;
  }

  const Bytes& pixels() const noexcept { return pixels_; }

  Rgb at(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  Bytes pixels_;
};

enum class MediaType { png, jpeg };

inline std::string_view mime(MediaType t) noexcept {
  return t == MediaType::png ? "image/png" : "image/jpeg";
}

inline Result<MediaType, ImageError> sniff_media_type(const Bytes& data) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (data.size() >= 8 && std::equal(std::begin(kPng), std::end(kPng), data.begin()))
    return MediaType::png;
  if (data.size() >= 3 && data[0] == 0xFF && data[1] == 0xD8 && data[2] == 0xFF)
    return MediaType::jpeg;
  return fail(ImageError{"unrecognized image format (expected PNG or JPEG)"});
}

inline Result<Bytes, ImageError> encode_png(const RasterImage& img) {
  if (!img.valid()) return fail(ImageError{"cannot encode an empty image"});
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels().data(), 0, nullptr))
    return fail(ImageError{std::string("png sizing failed: ") + image.message});
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels().data(), 0, nullptr))
    return fail(ImageError{std::string("png encode failed: ") + image.message});
  out.resize(size);
  png_image_free(&image);
  return out;
}

inline Result<RasterImage, ImageError> decode_png(const Bytes& data) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, data.data(), data.size()))
    return fail(ImageError{std::string("png decode failed: ") + image.message});
  image.format = PNG_FORMAT_RGB;
  Bytes pixels(PNG_IMAGE_SIZE(image));
  // Transparent pixels are composited onto black.
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    return fail(ImageError{std::string("png decode failed: ") + image.message});
  }
  return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height),
                     std::move(pixels));
}

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Only trivially destructible locals live between setjmp and longjmp.
inline bool jpeg_decode_raw(const Bytes& data, Bytes& out, int& width, int& height,
                            char (&message)[JMSG_LENGTH_MAX]) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    std::memcpy(message, err.message, sizeof message);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  out.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace detail

inline Result<RasterImage, ImageError> decode_jpeg(const Bytes& data) {
  Bytes pixels;
  int width = 0;
  int height = 0;
  char message[JMSG_LENGTH_MAX] = {};
  if (!detail::jpeg_decode_raw(data, pixels, width, height, message))
    return fail(ImageError{std::string("jpeg decode failed: ") + message});
  return RasterImage(width, height, std::move(pixels));
}

inline Result<RasterImage, ImageError> decode_image(const Bytes& data) {
  auto type = sniff_media_type(data);
  if (!type) return fail(type.error());
  return *type == MediaType::png ? decode_png(data) : decode_jpeg(data);
}

/// An image as read from disk: decoded pixels plus the original bytes,
/// which are what gets forwarded to remote models untouched.
struct LoadedImage {
  RasterImage raster;
  Bytes encoded;
  MediaType media_type = MediaType::png;
};

inline Result<Bytes, ImageError> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return fail(ImageError{"cannot open " + path.string()});
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) return fail(ImageError{"read error on " + path.string()});
  return data;
}

inline Result<bool, ImageError> write_file(const std::filesystem::path& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return fail(ImageError{"cannot open " + path.string() + " for writing"});
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) return fail(ImageError{"write error on " + path.string()});
  return true;
}

inline Result<LoadedImage, ImageError> load_image(const std::filesystem::path& path) {
  auto data = read_file(path);
  if (!data) return fail(data.error());
  auto type = sniff_media_type(*data);
  if (!type) return fail(ImageError{path.string() + ": " + type.error().message});
  auto raster = decode_image(*data);
  if (!raster) return fail(ImageError{path.string() + ": " + raster.error().message});
  return LoadedImage{std::move(raster).value(), std::move(data).value(), *type};
}

/// Box-filter downscale so that the longer side is at most max_side.
/// Images already within the limit are returned unchanged.
inline RasterImage downscale_to_max_side(const RasterImage& img, int max_side) {
  const int longest = std::max(img.width(), img.height());
  if (max_side <= 0 || longest <= max_side) return img;
  const double scale = static_cast<double>(max_side) / longest;
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * scale)));
  RasterImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = y * img.height() / h;
    const int y1 = std::max(y0 + 1, (y + 1) * img.height() / h);
    for (int x = 0; x < w; ++x) {
      const int x0 = x * img.width() / w;
      const int x1 = std::max(x0 + 1, (x + 1) * img.width() / w);
      unsigned long sr = 0, sg = 0, sb = 0, n = 0;
      for (int yy = y0; yy < y1; ++yy) {
        for (int xx = x0; xx < x1; ++xx) {
          const Rgb c = img.at(xx, yy);
          sr += c.r;
          sg += c.g;
          sb += c.b;
          ++n;
        }
      }
      out.set(x, y,
              {static_cast<std::uint8_t>((sr + n / 2) / n), static_cast<std::uint8_t>((sg + n / 2) / n),
               static_cast<std::uint8_t>((sb + n / 2) / n)});
    }
  }
  return out;
}

// --- base64 (RFC 4648, standard alphabet, padded) ---

inline std::string base64_encode(const Bytes& data) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = data.size() - i; rest == 1) {
    const std::uint32_t v = data[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline Result<Bytes, ImageError> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) return fail(ImageError{"base64 length not a multiple of 4"});
  Bytes out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else if (pad > 0 || (v[k] = value(c)) < 0) {
        return fail(ImageError{"invalid base64 input"});
      }
    }
    const std::uint32_t n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((n >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n & 0xFF));
  }
  return out;
}

}  // namespace optic
