#pragma once

// 8-bit PNG interchange for images (RGB), masks and mattes (grayscale).
// Requires linking libpng.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shadowcomp/error.hpp"
#include "shadowcomp/raster.hpp"

namespace shadowcomp {

namespace detail {

struct PngImage {
  png_image img{};
  PngImage() {
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline std::uint8_t quantize(double v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Reads the file and returns bytes in the requested layout after checking the
// native format with `accept`.
template <typename Accept>
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, png_uint_32 want_format,
                                   Accept accept, const char* expected, png_uint_32& h, png_uint_32& w) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
  PngImage p;
  if (!png_image_begin_read_from_file(&p.img, path.string().c_str())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + p.img.message);
  }
  if (!accept(p.img.format)) {
    throw IoError("unsupported PNG layout in " + path.string() + " (expected " + expected + ")");
  }
  p.img.format = want_format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG " + path.string() + ": " + p.img.message);
  }
  h = p.img.height;
  w = p.img.width;
  return buf;
}

inline void write_png(const std::filesystem::path& path, png_uint_32 format, png_uint_32 h,
                      png_uint_32 w, const std::vector<std::uint8_t>& bytes) {
  PngImage p;
  p.img.width = w;
  p.img.height = h;
  p.img.format = format;
  if (!png_image_write_to_file(&p.img, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + p.img.message);
  }
}

inline bool is_8bit_rgb(png_uint_32 f) {
  return (f & PNG_FORMAT_FLAG_COLOR) && !(f & PNG_FORMAT_FLAG_ALPHA) && !(f & PNG_FORMAT_FLAG_LINEAR);
}

inline bool is_8bit_gray(png_uint_32 f) {
  return !(f & PNG_FORMAT_FLAG_COLOR) && !(f & PNG_FORMAT_FLAG_ALPHA) && !(f & PNG_FORMAT_FLAG_LINEAR);
}

inline std::vector<std::uint8_t> read_gray(const std::filesystem::path& path, png_uint_32& h, png_uint_32& w) {
  return read_png(path, PNG_FORMAT_GRAY, is_8bit_gray, "8-bit grayscale", h, w);
}

}  // namespace detail

/// Loads an 8-bit RGB PNG; byte v becomes v / 255.
inline Image load_image(const std::filesystem::path& path) {
  png_uint_32 h = 0, w = 0;
  const auto bytes = detail::read_png(path, PNG_FORMAT_RGB, detail::is_8bit_rgb, "8-bit RGB", h, w);
  Image img(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.values()[i] = bytes[i] / 255.0;
  return img;
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(img.size());
  std::transform(img.values().begin(), img.values().end(), bytes.begin(), detail::quantize);
  detail::write_png(path, PNG_FORMAT_RGB, static_cast<png_uint_32>(img.height()),
                    static_cast<png_uint_32>(img.width()), bytes);
}

/// Loads an 8-bit grayscale PNG; bytes above 127 become 1.
inline Mask load_mask(const std::filesystem::path& path) {
  png_uint_32 h = 0, w = 0;
  const auto bytes = detail::read_gray(path, h, w);
  Mask m(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) m.values()[i] = bytes[i] > 127 ? 1 : 0;
  return m;
}

/// Writes 0 -> byte 0 and 1 -> byte 255.
inline void save_mask(const Mask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(mask.size());
  std::transform(mask.values().begin(), mask.values().end(), bytes.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  detail::write_png(path, PNG_FORMAT_GRAY, static_cast<png_uint_32>(mask.height()),
                    static_cast<png_uint_32>(mask.width()), bytes);
}

inline ShadowMatte load_matte(const std::filesystem::path& path) {
  png_uint_32 h = 0, w = 0;
  const auto bytes = detail::read_gray(path, h, w);
  ShadowMatte m(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) m.values()[i] = bytes[i] / 255.0;
  return m;
}

inline void save_matte(const ShadowMatte& matte, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(matte.size());
  std::transform(matte.values().begin(), matte.values().end(), bytes.begin(), detail::quantize);
  detail::write_png(path, PNG_FORMAT_GRAY, static_cast<png_uint_32>(matte.height()),
                    static_cast<png_uint_32>(matte.width()), bytes);
}

}  // namespace shadowcomp
