#pragma once

// Paired-sample synthesis from annotated scenes. A scene is a shadowed photo
// (the target), its shadow-free version, and object/shadow mask pairs. Putting
// the shadow-free pixels back inside a chosen subset of shadows yields a
// composite whose missing shadows the target still shows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowcomp/error.hpp"
#include "shadowcomp/illumination.hpp"
#include "shadowcomp/imaging.hpp"
#include "shadowcomp/png_io.hpp"
#include "shadowcomp/raster.hpp"

namespace shadowcomp {

struct ObjectShadowPair {
  Mask object;
  Mask shadow;
};

struct SceneAnnotation {
  std::string scene_id;
  Image ground_truth;  // with every shadow
  Image deshadowed;    // every shadow removed
  std::vector<ObjectShadowPair> pairs;

  void validate() const {
    if (pairs.empty()) throw ValidationError("scene '" + scene_id + "' has no object-shadow pairs");
    require_same_shape(ground_truth, deshadowed, ("scene '" + scene_id + "' deshadowed image").c_str());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const std::string tag = "scene '" + scene_id + "' pair " + std::to_string(k);
      require_same_shape(ground_truth, pairs[k].object, (tag + " object mask").c_str());
      require_same_shape(ground_truth, pairs[k].shadow, (tag + " shadow mask").c_str());
    }
  }
};

enum class Split { Bos, BosFree };

inline const char* to_string(Split s) { return s == Split::Bos ? "BOS" : "BOS-free"; }

inline Split parse_split(const std::string& s) {
  if (s == "BOS") return Split::Bos;
  if (s == "BOS-free") return Split::BosFree;
  throw ValidationError("unknown split tag '" + s + "'");
}

struct CompositeSample {
  std::string scene_id;
  std::vector<std::size_t> fg_indices;
  Image composite;
  Mask fg_object;
  Mask fg_shadow;
  Mask bos;  // background object-shadow pairs
  Image target;
  Split split = Split::Bos;

  double ratio() const { return mask_area_ratio(fg_shadow); }
};

/// Composite for one foreground selection: deshadowed pixels inside the union
/// of the selected shadows, target pixels elsewhere. Masks of every pair not
/// selected form the background object-shadow mask.
inline CompositeSample synthesize_composite(const SceneAnnotation& scene, std::vector<std::size_t> selected) {
  scene.validate();
  if (selected.empty()) throw InvalidArgument("synthesize_composite: empty foreground selection");
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  if (selected.back() >= scene.pairs.size()) {
    throw InvalidArgument("synthesize_composite: pair index " + std::to_string(selected.back()) +
                          " out of range for scene '" + scene.scene_id + "' with " +
                          std::to_string(scene.pairs.size()) + " pairs");
  }

  const std::size_t h = scene.ground_truth.height(), w = scene.ground_truth.width();
  CompositeSample s;
  s.scene_id = scene.scene_id;
  s.fg_indices = selected;
  s.fg_object = Mask(h, w, 0);
  s.fg_shadow = Mask(h, w, 0);
  s.bos = Mask(h, w, 0);
  std::vector<bool> chosen(scene.pairs.size(), false);
  for (std::size_t k : selected) chosen[k] = true;
  for (std::size_t k = 0; k < scene.pairs.size(); ++k) {
    const auto& p = scene.pairs[k];
    if (chosen[k]) {
      s.fg_object = mask_union({s.fg_object, p.object});
      s.fg_shadow = mask_union({s.fg_shadow, p.shadow});
    } else {
      s.bos = mask_union({s.bos, p.object, p.shadow});
    }
  }
  s.split = selected.size() < scene.pairs.size() ? Split::Bos : Split::BosFree;

  s.target = scene.ground_truth;
  s.composite = scene.ground_truth;
  for (std::size_t i = 0; i < s.fg_shadow.pixel_count(); ++i) {
    if (!s.fg_shadow.at_pixel(i)) continue;
    for (std::size_t k = 0; k < 3; ++k) s.composite.at_pixel(i, k) = scene.deshadowed.at_pixel(i, k);
  }
  return s;
}

/// `count` samples, each from a uniformly drawn non-empty subset of the pairs.
/// Each pair joins the subset on a fair coin flip and empty draws are redrawn,
/// which is exactly uniform over the 2^n - 1 non-empty subsets.
inline std::vector<CompositeSample> enumerate_training_samples(const SceneAnnotation& scene, std::uint64_t seed,
                                                              std::size_t count) {
  scene.validate();
  std::mt19937_64 rng(seed);
  std::vector<CompositeSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<std::size_t> subset;
    do {
      subset.clear();
      std::uint64_t bits = 0;
      for (std::size_t k = 0; k < scene.pairs.size(); ++k) {
        if (k % 64 == 0) bits = rng();
        if ((bits >> (k % 64)) & 1u) subset.push_back(k);
      }
    } while (subset.empty());
    out.push_back(synthesize_composite(scene, std::move(subset)));
  }
  return out;
}

inline SceneAnnotation resize_scene(const SceneAnnotation& scene, std::size_t size) {
  SceneAnnotation out;
  out.scene_id = scene.scene_id;
  out.ground_truth = resize_bilinear(scene.ground_truth, size, size);
  out.deshadowed = resize_bilinear(scene.deshadowed, size, size);
  for (const auto& p : scene.pairs) {
    out.pairs.push_back({resize_mask(p.object, size, size), resize_mask(p.shadow, size, size)});
  }
  return out;
}

/// Single-foreground evaluation pairs: every (scene, pair) becomes a candidate
/// after resizing to size x size; candidates whose foreground shadow ratio is
/// <= min_ratio are dropped. Output order is (scene order, pair index).
inline std::vector<CompositeSample> build_test_pairs(const std::vector<SceneAnnotation>& scenes, double min_ratio,
                                                     std::size_t target_size) {
  if (!(min_ratio >= 0.0 && min_ratio < 1.0)) throw InvalidArgument("min_ratio must lie in [0, 1)");
  if (target_size == 0) throw InvalidArgument("target size must be positive");
  std::vector<CompositeSample> out;
  for (const auto& raw : scenes) {
    raw.validate();
    const SceneAnnotation scene = resize_scene(raw, target_size);
    for (std::size_t k = 0; k < scene.pairs.size(); ++k) {
      CompositeSample s = synthesize_composite(scene, {k});
      if (s.ratio() > min_ratio) out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene directories: <root>/<scene_id>/{image,deshadowed,object_K,shadow_K}.png
// with K = 0, 1, ... contiguous.

inline constexpr const char* kSceneLayoutVersion = "scene-dir/1";

inline SceneAnnotation load_scene(const std::filesystem::path& dir) {
  SceneAnnotation s;
  s.scene_id = dir.filename().string();
  s.ground_truth = load_image(dir / "image.png");
  s.deshadowed = load_image(dir / "deshadowed.png");
  for (std::size_t k = 0;; ++k) {
    const auto obj = dir / ("object_" + std::to_string(k) + ".png");
    const auto shd = dir / ("shadow_" + std::to_string(k) + ".png");
    const bool has_obj = std::filesystem::exists(obj), has_shd = std::filesystem::exists(shd);
    if (!has_obj && !has_shd) break;
    if (has_obj != has_shd) {
      throw ValidationError("scene '" + s.scene_id + "': " + (has_obj ? shd : obj).string() + " is missing");
    }
    ObjectShadowPair p{load_mask(obj), load_mask(shd)};
    for (const auto& [m, path] : {std::pair{&p.object, obj}, std::pair{&p.shadow, shd}}) {
      if (!m->same_shape(s.ground_truth)) {
        throw ValidationError("scene '" + s.scene_id + "': " + path.string() + " is " + std::to_string(m->height()) +
                              "x" + std::to_string(m->width()) + ", image is " +
                              std::to_string(s.ground_truth.height()) + "x" + std::to_string(s.ground_truth.width()));
      }
    }
    s.pairs.push_back(std::move(p));
  }
  if (!s.deshadowed.same_shape(s.ground_truth)) {
    throw ValidationError("scene '" + s.scene_id + "': " + (dir / "deshadowed.png").string() +
                          " size differs from image.png");
  }
  if (s.pairs.empty()) throw ValidationError("scene '" + s.scene_id + "' in " + dir.string() + " has no object_0.png");
  return s;
}

/// Every sub-directory of `root`, sorted by name.
inline std::vector<SceneAnnotation> load_scenes(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw IoError("scene root is not a directory: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SceneAnnotation> scenes;
  for (const auto& d : dirs) scenes.push_back(load_scene(d));
  return scenes;
}

inline void save_scene(const SceneAnnotation& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_image(s.ground_truth, dir / "image.png");
  save_image(s.deshadowed, dir / "deshadowed.png");
  for (std::size_t k = 0; k < s.pairs.size(); ++k) {
    save_mask(s.pairs[k].object, dir / ("object_" + std::to_string(k) + ".png"));
    save_mask(s.pairs[k].shadow, dir / ("shadow_" + std::to_string(k) + ".png"));
  }
}

// ---------------------------------------------------------------------------
// Manifest: JSON lines, one record per sample, asset paths relative to the
// manifest's directory.

inline constexpr const char* kManifestFormat = "shadowcomp-manifest/1";
inline constexpr const char* kManifestFileName = "manifest.jsonl";

struct AssetPaths {
  std::string composite, fg_object, fg_shadow, bos, target, params;
};

struct ManifestRecord {
  std::string key;
  std::string scene_id;
  std::vector<std::size_t> fg_indices;
  Split split = Split::Bos;
  double ratio = 0.0;
  AssetPaths paths;
  std::optional<ShadowParams> shadow_params;  // absent when the shadow has < 2 pixels
};

struct DatasetManifest {
  std::filesystem::path path;
  std::vector<ManifestRecord> entries;
};

inline nlohmann::json to_json(const ManifestRecord& r) {
  return {{"format", kManifestFormat},
          {"key", r.key},
          {"scene_id", r.scene_id},
          {"fg_indices", r.fg_indices},
          {"split", to_string(r.split)},
          {"ratio", r.ratio},
          {"paths",
           {{"composite", r.paths.composite},
            {"fg_object", r.paths.fg_object},
            {"fg_shadow", r.paths.fg_shadow},
            {"bos", r.paths.bos},
            {"target", r.paths.target},
            {"params", r.paths.params}}},
          {"shadow_params", r.shadow_params ? nlohmann::json(*r.shadow_params) : nlohmann::json(nullptr)},
          {"scene_layout", kSceneLayoutVersion}};
}

inline ManifestRecord record_from_json(const nlohmann::json& j) {
  ManifestRecord r;
  if (j.value("format", std::string{}) != kManifestFormat) {
    throw ValidationError("unsupported manifest record format '" + j.value("format", std::string{}) + "'");
  }
  r.key = j.at("key").get<std::string>();
  r.scene_id = j.at("scene_id").get<std::string>();
  r.fg_indices = j.at("fg_indices").get<std::vector<std::size_t>>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.ratio = j.at("ratio").get<double>();
  const auto& p = j.at("paths");
  r.paths = {p.at("composite").get<std::string>(), p.at("fg_object").get<std::string>(),
             p.at("fg_shadow").get<std::string>(), p.at("bos").get<std::string>(),
             p.at("target").get<std::string>(),    p.at("params").get<std::string>()};
  if (!j.at("shadow_params").is_null()) r.shadow_params = j.at("shadow_params").get<ShadowParams>();
  return r;
}

/// Scene ids become file-name fragments; keep them portable.
inline std::string sanitize_id(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out.empty() ? "scene" : out;
}

inline std::string sample_key(std::size_t index, const CompositeSample& s) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << '_' << sanitize_id(s.scene_id) << "_fg";
  for (std::size_t i = 0; i < s.fg_indices.size(); ++i) os << (i ? "-" : "") << s.fg_indices[i];
  return os.str();
}

/// Ground-truth shadow parameters of a sample, or nullopt when the foreground
/// shadow is too small to regress.
inline std::optional<ShadowParams> ground_truth_params(const Image& composite, const Image& target,
                                                       const Mask& fg_shadow) {
  if (count_set(fg_shadow) < 2) return std::nullopt;
  return estimate_params(composite, target, fg_shadow);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

/// Writes five PNGs and a parameter sidecar per sample under out_dir/assets
/// plus out_dir/manifest.jsonl. Ground-truth parameters are regressed from the
/// in-memory composite and target.
inline DatasetManifest write_manifest(const std::vector<CompositeSample>& samples, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "assets", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "assets").string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.path = out_dir / kManifestFileName;
  std::string lines;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const CompositeSample& s = samples[i];
    ManifestRecord r;
    r.key = sample_key(i, s);
    r.scene_id = s.scene_id;
    r.fg_indices = s.fg_indices;
    r.split = s.split;
    r.ratio = s.ratio();
    const std::string base = "assets/" + r.key;
    r.paths = {base + "_composite.png", base + "_fg_object.png", base + "_fg_shadow.png",
               base + "_bos.png",       base + "_target.png",    base + "_params.json"};
    r.shadow_params = ground_truth_params(s.composite, s.target, s.fg_shadow);

    save_image(s.composite, out_dir / r.paths.composite);
    save_mask(s.fg_object, out_dir / r.paths.fg_object);
    save_mask(s.fg_shadow, out_dir / r.paths.fg_shadow);
    save_mask(s.bos, out_dir / r.paths.bos);
    save_image(s.target, out_dir / r.paths.target);
    const nlohmann::json side = {
        {"key", r.key}, {"shadow_params", r.shadow_params ? nlohmann::json(*r.shadow_params) : nlohmann::json(nullptr)}};
    write_text_file(out_dir / r.paths.params, side.dump(2) + "\n");

    lines += to_json(r).dump() + "\n";
    manifest.entries.push_back(std::move(r));
  }
  write_text_file(manifest.path, lines);
  return manifest;
}

/// Parses manifest records without touching the assets.
inline DatasetManifest read_manifest_records(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.entries.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

/// Maximum per-element deviation tolerated after PNG round trips.
inline constexpr double kManifestTolerance = 2.0 / 255.0;

struct LoadedSample {
  ManifestRecord record;
  CompositeSample sample;
};

inline std::filesystem::path asset_path(const DatasetManifest& m, const std::string& rel) {
  return m.path.parent_path() / rel;
}

inline CompositeSample load_sample_assets(const DatasetManifest& m, const ManifestRecord& r) {
  auto need = [&](const std::string& rel) {
    const auto p = asset_path(m, rel);
    if (!std::filesystem::exists(p)) throw IoError("sample " + r.key + ": missing asset " + p.string());
    return p;
  };
  CompositeSample s;
  s.scene_id = r.scene_id;
  s.fg_indices = r.fg_indices;
  s.split = r.split;
  s.composite = load_image(need(r.paths.composite));
  s.fg_object = load_mask(need(r.paths.fg_object));
  s.fg_shadow = load_mask(need(r.paths.fg_shadow));
  s.bos = load_mask(need(r.paths.bos));
  s.target = load_image(need(r.paths.target));
  return s;
}

/// Checks the invariants that survive serialisation: shapes agree, the
/// composite equals the target outside the foreground shadow (within
/// kManifestTolerance), the split tag matches the background mask and the
/// stored ratio matches the shadow mask.
inline void validate_sample(const ManifestRecord& r, const CompositeSample& s) {
  const std::string tag = "sample " + r.key;
  auto fail = [&](const std::string& msg) { throw ValidationError(tag + ": " + msg); };
  if (!s.composite.same_shape(s.target) || !s.composite.same_shape(s.fg_object) ||
      !s.composite.same_shape(s.fg_shadow) || !s.composite.same_shape(s.bos)) {
    fail("asset dimensions disagree");
  }
  for (std::size_t i = 0; i < s.fg_shadow.pixel_count(); ++i) {
    if (s.fg_shadow.at_pixel(i)) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      if (std::abs(s.composite.at_pixel(i, k) - s.target.at_pixel(i, k)) > kManifestTolerance) {
        fail("composite differs from target outside the foreground shadow at pixel (" +
             std::to_string(i / s.composite.width()) + ", " + std::to_string(i % s.composite.width()) + ")");
      }
    }
  }
  const bool bos_empty = count_set(s.bos) == 0;
  if (bos_empty != (r.split == Split::BosFree)) {
    fail(std::string("split tag ") + to_string(r.split) + " contradicts the background object-shadow mask");
  }
  if (std::abs(s.ratio() - r.ratio) > 1e-9) fail("stored shadow ratio does not match the shadow mask");
}

/// Loads and validates every sample of a manifest.
inline std::vector<LoadedSample> read_manifest(const std::filesystem::path& path) {
  const DatasetManifest m = read_manifest_records(path);
  std::vector<LoadedSample> out;
  out.reserve(m.entries.size());
  for (const ManifestRecord& r : m.entries) {
    CompositeSample s = load_sample_assets(m, r);
    validate_sample(r, s);
    out.push_back({r, std::move(s)});
  }
  return out;
}

}  // namespace shadowcomp
