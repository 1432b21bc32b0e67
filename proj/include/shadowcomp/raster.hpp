#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shadowcomp/error.hpp"

namespace shadowcomp {

/// Dense row-major raster with a compile-time channel count.
///
/// Element (row, col, channel) lives at ((row * width) + col) * Channels + channel.
template <typename T, std::size_t Channels>
class Raster {
 public:
  using value_type = T;
  static constexpr std::size_t channels = Channels;

  Raster() = default;

  Raster(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), data_(height * width * Channels, fill) {
    if (height == 0 || width == 0) {
      throw InvalidArgument("raster dimensions must be at least 1x1, got " +
                            std::to_string(height) + "x" + std::to_string(width));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col, std::size_t ch = 0) noexcept {
    return data_[(row * width_ + col) * Channels + ch];
  }
  const T& operator()(std::size_t row, std::size_t col, std::size_t ch = 0) const noexcept {
    return data_[(row * width_ + col) * Channels + ch];
  }

  /// Flat pixel index access: pixel i = row * width + col.
  T& at_pixel(std::size_t pixel, std::size_t ch = 0) noexcept { return data_[pixel * Channels + ch]; }
  const T& at_pixel(std::size_t pixel, std::size_t ch = 0) const noexcept {
    return data_[pixel * Channels + ch];
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  template <typename U, std::size_t C2>
  bool same_shape(const Raster<U, C2>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Raster& a, const Raster& b) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

/// RGB image with real intensities in [0, 1].
using Image = Raster<double, 3>;
/// Binary mask; every element is 0 or 1.
using Mask = Raster<std::uint8_t, 1>;
/// Soft single-channel weight map in [0, 1].
using ShadowMatte = Raster<double, 1>;

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.height()) + "x" +
                            std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                            "x" + std::to_string(b.width()));
  }
}

template <std::size_t C>
bool in_unit_range(const Raster<double, C>& r) noexcept {
  return std::all_of(r.values().begin(), r.values().end(),
                     [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

inline bool is_binary(const Mask& m) noexcept {
  return std::all_of(m.values().begin(), m.values().end(), [](std::uint8_t v) { return v <= 1; });
}

inline std::size_t count_set(const Mask& m) noexcept {
  return static_cast<std::size_t>(std::count(m.values().begin(), m.values().end(), std::uint8_t{1}));
}

inline ShadowMatte mask_to_matte(const Mask& m) {
  ShadowMatte out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) out.values()[i] = m.values()[i] ? 1.0 : 0.0;
  return out;
}

inline Mask complement(const Mask& m) {
  Mask out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) out.values()[i] = m.values()[i] ? 0 : 1;
  return out;
}

}  // namespace shadowcomp
