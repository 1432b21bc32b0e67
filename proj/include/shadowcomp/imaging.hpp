#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "shadowcomp/error.hpp"
#include "shadowcomp/raster.hpp"

namespace shadowcomp {

namespace detail {

// One axis of a half-pixel-centre resampler: output index i samples source
// coordinate (i + 0.5) * in / out - 0.5, clamped to [0, in - 1].
struct AxisTap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of hi
};

inline std::vector<AxisTap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<AxisTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double max_coord = static_cast<double>(in - 1);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

template <std::size_t C>
Raster<double, C> resample_bilinear(const Raster<double, C>& src, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw InvalidArgument("resize target dimensions must be >= 1");
  if (out_h == src.height() && out_w == src.width()) return src;

  const auto rows = bilinear_taps(src.height(), out_h);
  const auto cols = bilinear_taps(src.width(), out_w);
  Raster<double, C> out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const auto& ty = rows[r];
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto& tx = cols[c];
      for (std::size_t k = 0; k < C; ++k) {
        const double top = src(ty.lo, tx.lo, k) * (1.0 - tx.frac) + src(ty.lo, tx.hi, k) * tx.frac;
        const double bot = src(ty.hi, tx.lo, k) * (1.0 - tx.frac) + src(ty.hi, tx.hi, k) * tx.frac;
        // Convex weights keep [0,1] inputs in range; clamp absorbs rounding.
        out(r, c, k) = std::clamp(top * (1.0 - ty.frac) + bot * ty.frac, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Bilinear resize with half-pixel-centre alignment. Same-size requests return
/// an exact copy.
inline Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  return detail::resample_bilinear(img, out_h, out_w);
}

inline ShadowMatte resize_bilinear(const ShadowMatte& img, std::size_t out_h, std::size_t out_w) {
  return detail::resample_bilinear(img, out_h, out_w);
}

/// Resample the 0/1 field bilinearly, then set every output value >= 0.5.
inline Mask resize_mask(const Mask& mask, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw InvalidArgument("resize target dimensions must be >= 1");
  if (out_h == mask.height() && out_w == mask.width()) return mask;
  const ShadowMatte field = detail::resample_bilinear(mask_to_matte(mask), out_h, out_w);
  Mask out(out_h, out_w);
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = field.values()[i] >= 0.5 ? 1 : 0;
  return out;
}

inline Mask mask_union(std::span<const Mask> masks) {
  if (masks.empty()) throw InvalidArgument("mask_union needs at least one mask");
  Mask out = masks.front();
  for (const Mask& m : masks.subspan(1)) {
    require_same_shape(out, m, "mask_union");
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] |= m.values()[i];
  }
  return out;
}

inline Mask mask_union(std::initializer_list<Mask> masks) {
  return mask_union(std::span<const Mask>(masks.begin(), masks.size()));
}

/// Fraction of pixels that are set.
inline double mask_area_ratio(const Mask& mask) {
  return static_cast<double>(count_set(mask)) / static_cast<double>(mask.pixel_count());
}

}  // namespace shadowcomp
