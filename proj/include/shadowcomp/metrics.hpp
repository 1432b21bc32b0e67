#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowcomp/error.hpp"
#include "shadowcomp/raster.hpp"

namespace shadowcomp {

/// SSIM constants: 11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03,
/// dynamic range 1.
struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double centre = static_cast<double>(size / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - centre;
    g[i] = std::exp(-(x * x) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable "same" convolution with zero padding outside the raster.
inline std::vector<double> blur_same(std::span<const double> src, std::size_t h, std::size_t w,
                                     std::span<const double> kernel) {
  const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  std::vector<double> tmp(h * w, 0.0), out(h * w, 0.0);
  for (std::ptrdiff_t r = 0; r < H; ++r) {
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -half; t <= half; ++t) {
        const std::ptrdiff_t cc = c + t;
        if (cc < 0 || cc >= W) continue;
        acc += kernel[static_cast<std::size_t>(t + half)] * src[static_cast<std::size_t>(r * W + cc)];
      }
      tmp[static_cast<std::size_t>(r * W + c)] = acc;
    }
  }
  for (std::ptrdiff_t r = 0; r < H; ++r) {
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -half; t <= half; ++t) {
        const std::ptrdiff_t rr = r + t;
        if (rr < 0 || rr >= H) continue;
        acc += kernel[static_cast<std::size_t>(t + half)] * tmp[static_cast<std::size_t>(rr * W + c)];
      }
      out[static_cast<std::size_t>(r * W + c)] = acc;
    }
  }
  return out;
}

inline void require_local_mask(const Mask& m) {
  if (count_set(m) == 0) throw InvalidArgument("local metric mask is empty");
}

}  // namespace detail

/// Root mean square error on the 0-255 scale over every (pixel, channel), or
/// only over pixels where `mask` is set.
inline double rmse(const Image& a, const Image& b, const Mask* mask = nullptr) {
  require_same_shape(a, b, "rmse");
  if (mask) {
    require_same_shape(a, *mask, "rmse mask");
    detail::require_local_mask(*mask);
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    if (mask && !mask->at_pixel(i)) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      const double d = 255.0 * a.at_pixel(i, k) - 255.0 * b.at_pixel(i, k);
      sum += d * d;
    }
    n += 3;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

/// Per-pixel SSIM averaged over the three channels. Window statistics use
/// zero padding, so the map has the same size as the inputs.
inline ShadowMatte ssim_map(const Image& a, const Image& b, const SsimOptions& opt = {}) {
  require_same_shape(a, b, "ssim");
  if (a.height() < opt.window || a.width() < opt.window) {
    throw InvalidArgument("ssim needs images of at least " + std::to_string(opt.window) + "x" +
                          std::to_string(opt.window));
  }
  const std::size_t h = a.height(), w = a.width(), n = a.pixel_count();
  const auto kernel = detail::gaussian_kernel(opt.window, opt.sigma);
  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);

  ShadowMatte out(h, w, 0.0);
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.at_pixel(i, k);
      y[i] = b.at_pixel(i, k);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::blur_same(x, h, w, kernel);
    const auto my = detail::blur_same(y, h, w, kernel);
    const auto exx = detail::blur_same(xx, h, w, kernel);
    const auto eyy = detail::blur_same(yy, h, w, kernel);
    const auto exy = detail::blur_same(xy, h, w, kernel);
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cov = exy[i] - mx[i] * my[i];
      const double s = ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                       ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      out.at_pixel(i) += s / 3.0;
    }
  }
  return out;
}

/// Mean of the SSIM map over all pixels, or over the set pixels of `mask`.
inline double ssim(const Image& a, const Image& b, const Mask* mask = nullptr, const SsimOptions& opt = {}) {
  if (mask) {
    require_same_shape(a, *mask, "ssim mask");
    detail::require_local_mask(*mask);
  }
  const ShadowMatte map = ssim_map(a, b, opt);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < map.pixel_count(); ++i) {
    if (mask && !mask->at_pixel(i)) continue;
    sum += map.at_pixel(i);
    ++n;
  }
  return sum / static_cast<double>(n);
}

/// Global and shadow-local RMSE/SSIM for one generated image. The local pair is
/// absent when the foreground shadow mask is empty.
struct MetricReport {
  double grmse = 0.0;
  std::optional<double> lrmse;
  double gssim = 1.0;
  std::optional<double> lssim;
  std::size_t n_pixels_local = 0;
};

inline MetricReport evaluate_pair(const Image& generated, const Image& target, const Mask& fg_shadow) {
  require_same_shape(generated, fg_shadow, "evaluate_pair mask");
  MetricReport r;
  r.grmse = rmse(generated, target);
  r.gssim = ssim(generated, target);
  r.n_pixels_local = count_set(fg_shadow);
  if (r.n_pixels_local > 0) {
    r.lrmse = rmse(generated, target, &fg_shadow);
    r.lssim = ssim(generated, target, &fg_shadow);
  }
  return r;
}

/// Unweighted mean over reports, in input order. Local terms average over the
/// reports that define them. Returns nullopt for an empty list.
inline std::optional<MetricReport> aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) return std::nullopt;
  MetricReport out;
  out.grmse = 0.0;
  out.gssim = 0.0;
  double lr = 0.0, ls = 0.0;
  std::size_t n_local = 0;
  for (const MetricReport& r : reports) {
    out.grmse += r.grmse;
    out.gssim += r.gssim;
    out.n_pixels_local += r.n_pixels_local;
    if (r.lrmse && r.lssim) {
      lr += *r.lrmse;
      ls += *r.lssim;
      ++n_local;
    }
  }
  const auto n = static_cast<double>(reports.size());
  out.grmse /= n;
  out.gssim /= n;
  if (n_local > 0) {
    out.lrmse = lr / static_cast<double>(n_local);
    out.lssim = ls / static_cast<double>(n_local);
  }
  return out;
}

inline nlohmann::json to_json(const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"grmse", r.grmse}, {"lrmse", opt(r.lrmse)}, {"gssim", r.gssim},
          {"lssim", opt(r.lssim)}, {"n_pixels_local", r.n_pixels_local}};
}

inline nlohmann::json to_json(const std::optional<MetricReport>& r) {
  return r ? to_json(*r) : nlohmann::json(nullptr);
}

/// Shadow-ratio bin edges used for the shadow-size breakdown.
inline const std::vector<double>& default_ratio_edges() {
  static const std::vector<double> edges{0.0, 0.02, 0.04, 0.08, 1.0};
  return edges;
}

struct RatedReport {
  double ratio = 0.0;
  MetricReport report;
};

struct RatioBins {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::vector<std::optional<MetricReport>> per_bin_reports;
};

inline void validate_ratio_edges(std::span<const double> edges) {
  if (edges.size() < 2) throw InvalidArgument("ratio bins need at least two edges");
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    if (!(edges[j] < edges[j + 1])) throw InvalidArgument("ratio bin edges must be strictly ascending");
  }
}

/// Index of the bin with edges[j] < ratio <= edges[j+1].
inline std::size_t ratio_bin_index(double ratio, std::span<const double> edges) {
  validate_ratio_edges(edges);
  if (!(ratio > edges.front() && ratio <= edges.back())) {
    throw InvalidArgument("shadow ratio " + std::to_string(ratio) + " outside bin coverage (" +
                          std::to_string(edges.front()) + ", " + std::to_string(edges.back()) + "]");
  }
  std::size_t j = 0;
  while (ratio > edges[j + 1]) ++j;
  return j;
}

inline RatioBins bin_by_shadow_ratio(std::span<const RatedReport> samples,
                                     std::span<const double> edges = default_ratio_edges()) {
  validate_ratio_edges(edges);
  RatioBins bins;
  bins.edges.assign(edges.begin(), edges.end());
  std::vector<std::vector<MetricReport>> members(edges.size() - 1);
  for (const RatedReport& s : samples) members[ratio_bin_index(s.ratio, edges)].push_back(s.report);
  for (auto& m : members) {
    bins.counts.push_back(m.size());
    bins.per_bin_reports.push_back(aggregate(m));
  }
  return bins;
}

inline nlohmann::json to_json(const RatioBins& bins) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t j = 0; j < bins.counts.size(); ++j) {
    arr.push_back({{"lower", bins.edges[j]},
                   {"upper", bins.edges[j + 1]},
                   {"count", bins.counts[j]},
                   {"report", to_json(bins.per_bin_reports[j])}});
  }
  return arr;
}

}  // namespace shadowcomp
