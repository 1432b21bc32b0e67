#pragma once

// Synthetic scenes with known shadow parameters.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "shadowcomp/shadowcomp.hpp"

namespace fixtures {

using namespace shadowcomp;

/// Rounds every element to the 8-bit grid so in-memory and PNG values agree.
inline Image on_byte_grid(Image img) {
  for (double& v : img.values()) v = detail::quantize(v) / 255.0;
  return img;
}

/// Smooth gradient plus per-pixel noise; every value is an even byte in [60, 230].
inline Image textured(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t k = 0; k < 3; ++k) {
        const double base = 80.0 + 100.0 * (0.5 * r / h + 0.3 * c / w + 0.2 * k / 3.0);
        const int noise = static_cast<int>(rng() % 41) - 20;
        int v = static_cast<int>(base) + noise;
        v = std::clamp(v, 60, 230) & ~1;
        img(r, c, k) = v / 255.0;
      }
  return img;
}

inline void fill_rect(Mask& m, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  for (std::size_t r = r0; r < std::min(r1, m.height()); ++r)
    for (std::size_t c = c0; c < std::min(c1, m.width()); ++c) m(r, c) = 1;
}

/// Shadow matte with a half-strength ring on the boundary of the mask.
inline ShadowMatte ring_matte(const Mask& shadow) {
  ShadowMatte a = mask_to_matte(shadow);
  const std::size_t h = shadow.height(), w = shadow.width();
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      if (!shadow(r, c)) continue;
      const bool edge = r == 0 || c == 0 || r + 1 == h || c + 1 == w || !shadow(r - 1, c) || !shadow(r + 1, c) ||
                        !shadow(r, c - 1) || !shadow(r, c + 1);
      if (edge) a(r, c) = 0.5;
    }
  return a;
}

struct SceneOptions {
  std::size_t size = 64;
  std::size_t pairs = 2;           // at most 3
  bool tiny_last = false;          // last pair gets a 2x2 shadow
  bool penumbra = false;           // half-strength ring at shadow boundaries
  ShadowParams params{{0.5, 0.5, 0.5}, {51.0 / 255.0, 51.0 / 255.0, 51.0 / 255.0}};
};

/// A scene whose ground truth is the deshadowed image darkened by
/// `opt.params` inside every shadow, quantized to the byte grid.
inline SceneAnnotation make_scene(const std::string& id, std::uint64_t seed, const SceneOptions& opt = {}) {
  const std::size_t n = opt.size;
  SceneAnnotation s;
  s.scene_id = id;
  s.deshadowed = textured(n, n, seed);
  Mask all(n, n, 0);
  for (std::size_t k = 0; k < opt.pairs; ++k) {
    Mask obj(n, n, 0), shd(n, n, 0);
    const std::size_t c0 = n * (5 + 30 * k) / 100, c1 = c0 + n * 22 / 100;
    fill_rect(obj, n / 10, n * 4 / 10, c0, c1);
    if (opt.tiny_last && k + 1 == opt.pairs) {
      fill_rect(shd, n * 4 / 10, n * 4 / 10 + 2, c0, c0 + 2);
    } else {
      fill_rect(shd, n * 4 / 10, n * 4 / 10 + n * (15 + 5 * k) / 100, c0, c1);
    }
    all = mask_union({all, shd});
    s.pairs.push_back({obj, shd});
  }
  const ShadowMatte alpha = opt.penumbra ? ring_matte(all) : mask_to_matte(all);
  s.ground_truth = on_byte_grid(fill_shadow(s.deshadowed, opt.params, alpha));
  return s;
}

/// Three scenes with 2, 1 and 3 pairs.
inline std::vector<SceneAnnotation> three_scenes(const SceneOptions& base = {}) {
  std::vector<SceneAnnotation> out;
  const std::size_t pairs[] = {2, 1, 3};
  for (std::size_t i = 0; i < 3; ++i) {
    SceneOptions o = base;
    o.pairs = pairs[i];
    out.push_back(make_scene("scene_" + std::to_string(i), 100 + i, o));
  }
  return out;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("shadowcomp_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace fixtures
