#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "shadowcomp/error.hpp"
#include "shadowcomp/raster.hpp"

namespace shadowcomp {

/// Per-channel affine map v -> w[k] * v + b[k]. Holds the darkening
/// coefficients; `invert` turns them into the relighting ones.
struct ShadowParams {
  std::array<double, 3> w{1.0, 1.0, 1.0};
  std::array<double, 3> b{0.0, 0.0, 0.0};

  static ShadowParams identity() { return {}; }
  static ShadowParams uniform(double w, double b) { return {{w, w, w}, {b, b, b}}; }

  bool finite() const noexcept {
    return std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); }) &&
           std::all_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ShadowParams&, const ShadowParams&) = default;
};

inline void to_json(nlohmann::json& j, const ShadowParams& p) { j = {{"w", p.w}, {"b", p.b}}; }

inline void from_json(const nlohmann::json& j, ShadowParams& p) {
  j.at("w").get_to(p.w);
  j.at("b").get_to(p.b);
  if (!p.finite()) throw ValidationError("shadow parameters must be finite");
}

/// clamp(w[k] * img + b[k], 0, 1) per channel.
inline Image darken(const Image& img, const ShadowParams& p) {
  Image out(img.height(), img.width());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      out.at_pixel(i, k) = std::clamp(p.w[k] * img.at_pixel(i, k) + p.b[k], 0.0, 1.0);
    }
  }
  return out;
}

/// Inverse affine map: w' = 1 / w, b' = -b / w.
inline ShadowParams invert(const ShadowParams& p) {
  ShadowParams out;
  for (std::size_t k = 0; k < 3; ++k) {
    if (p.w[k] == 0.0) {
      throw NonInvertible("shadow parameters are not invertible: w[" + std::to_string(k) + "] == 0");
    }
    out.w[k] = 1.0 / p.w[k];
    out.b[k] = -p.b[k] / p.w[k];
  }
  return out;
}

/// Variance threshold below which a channel is treated as constant.
inline constexpr double kDegenerateVariance = 1e-12;

/// Per-channel ordinary least squares of `lit` onto `shadowed` over the set
/// pixels of `region`. Constant channels fall back to w = 1 and b = mean offset.
///
/// Accumulation runs in raster order so results are bit-stable.
inline ShadowParams estimate_params(const Image& lit, const Image& shadowed, const Mask& region) {
  require_same_shape(lit, shadowed, "estimate_params images");
  require_same_shape(lit, region, "estimate_params mask");
  const std::size_t n = count_set(region);
  if (n < 2) {
    throw InvalidArgument("estimate_params needs at least 2 masked pixels, got " + std::to_string(n));
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  ShadowParams p;
  for (std::size_t k = 0; k < 3; ++k) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < region.pixel_count(); ++i) {
      if (!region.at_pixel(i)) continue;
      sx += lit.at_pixel(i, k);
      sy += shadowed.at_pixel(i, k);
    }
    const double mx = sx * inv_n;
    const double my = sy * inv_n;
    // Centred second moments; better conditioned than the raw normal equations.
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < region.pixel_count(); ++i) {
      if (!region.at_pixel(i)) continue;
      const double dx = lit.at_pixel(i, k) - mx;
      sxx += dx * dx;
      sxy += dx * (shadowed.at_pixel(i, k) - my);
    }
    if (sxx * inv_n < kDegenerateVariance) {
      p.w[k] = 1.0;
      p.b[k] = my - mx;
    } else {
      p.w[k] = sxy / sxx;
      p.b[k] = my - p.w[k] * mx;
    }
  }
  return p;
}

/// lit * (1 - alpha) + dark * alpha, alpha broadcast over channels.
inline Image compose(const Image& lit, const Image& dark, const ShadowMatte& alpha) {
  require_same_shape(lit, dark, "compose images");
  require_same_shape(lit, alpha, "compose matte");
  Image out(lit.height(), lit.width());
  for (std::size_t i = 0; i < lit.pixel_count(); ++i) {
    const double a = alpha.at_pixel(i);
    for (std::size_t k = 0; k < 3; ++k) {
      // Difference form keeps dark == lit exact; the endpoints are taken as is.
      const double l = lit.at_pixel(i, k), d = dark.at_pixel(i, k);
      out.at_pixel(i, k) = a == 1.0 ? d : l + a * (d - l);
    }
  }
  return out;
}

namespace detail {

// One pass of a 3-tap box filter along rows then columns, edges replicated.
inline ShadowMatte box3(const ShadowMatte& in) {
  const std::size_t h = in.height(), w = in.width();
  ShadowMatte tmp(h, w), out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t cl = c == 0 ? 0 : c - 1;
      const std::size_t cr = c + 1 == w ? c : c + 1;
      tmp(r, c) = (in(r, cl) + in(r, c) + in(r, cr)) / 3.0;
    }
  }
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t ru = r == 0 ? 0 : r - 1;
    const std::size_t rd = r + 1 == h ? r : r + 1;
    for (std::size_t c = 0; c < w; ++c) {
      out(r, c) = std::clamp((tmp(ru, c) + tmp(r, c) + tmp(rd, c)) / 3.0, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace detail

/// Soft matte from a binary shadow mask: `radius` passes of a separable 3x3 box
/// blur. Each pass widens the transition band by one pixel on either side, so
/// pixels more than `radius` away from the mask boundary keep their value.
inline ShadowMatte synthesize_matte(const Mask& shadow, std::size_t radius) {
  ShadowMatte m = mask_to_matte(shadow);
  for (std::size_t pass = 0; pass < radius; ++pass) m = detail::box3(m);
  return m;
}

/// compose(lit, darken(lit, p), alpha): the shadowed rendering of `lit`.
inline Image fill_shadow(const Image& lit, const ShadowParams& p, const ShadowMatte& alpha) {
  return compose(lit, darken(lit, p), alpha);
}

/// Partial derivatives of fill_shadow at one evaluation point.
struct FillGradients {
  Image d_w;      // d out(k,i) / d w[k]
  Image d_b;      // d out(k,i) / d b[k]
  Image d_alpha;  // d out(k,i) / d alpha(i)
};

/// Analytic derivatives of fill_shadow. Throws NonDifferentiable if the
/// unclamped darkened value leaves (0, 1) anywhere.
inline FillGradients compose_gradients(const Image& lit, const ShadowParams& p, const ShadowMatte& alpha) {
  require_same_shape(lit, alpha, "compose_gradients");
  FillGradients g{Image(lit.height(), lit.width()), Image(lit.height(), lit.width()),
                  Image(lit.height(), lit.width())};
  for (std::size_t i = 0; i < lit.pixel_count(); ++i) {
    const double a = alpha.at_pixel(i);
    for (std::size_t k = 0; k < 3; ++k) {
      const double c = lit.at_pixel(i, k);
      const double dark = p.w[k] * c + p.b[k];
      if (!(dark > 0.0 && dark < 1.0)) {
        throw NonDifferentiable("darkening clamps at pixel " + std::to_string(i) + " channel " +
                                std::to_string(k));
      }
      g.d_w.at_pixel(i, k) = a * c;
      g.d_b.at_pixel(i, k) = a;
      g.d_alpha.at_pixel(i, k) = dark - c;
    }
  }
  return g;
}

}  // namespace shadowcomp
