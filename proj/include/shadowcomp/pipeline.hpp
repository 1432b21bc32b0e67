#pragma once

// Subcommand implementations shared by the command-line tool and the tests.
// Each returns a process exit status: 0 success, 1 validation or check
// failure, 2 usage error, 3 I/O error. Machine output is JSON on `out`,
// progress and diagnostics go to `log`.
//
// The fill stage is a procedural, non-learned baseline: regressed shadow
// parameters plus a blurred mask stand in for a trained generator.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowcomp/arch_spec.hpp"
#include "shadowcomp/cai_attention.hpp"
#include "shadowcomp/dataset.hpp"
#include "shadowcomp/error.hpp"
#include "shadowcomp/illumination.hpp"
#include "shadowcomp/losses.hpp"
#include "shadowcomp/metrics.hpp"
#include "shadowcomp/parallel.hpp"
#include "shadowcomp/png_io.hpp"

namespace shadowcomp {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitIo = 3 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  return kExitCheckFailed;
}

struct SynthOptions {
  std::size_t size = 256;
  double min_ratio = 0.0005;
  std::uint64_t seed = 0;
  std::size_t train_per_scene = 0;  // 0: test pairs only
  std::size_t jobs = 0;
};

struct EstimateOptions {
  std::size_t jobs = 0;
};

struct FillOptions {
  std::size_t radius = 3;
  std::size_t jobs = 0;
};

struct MetricsOptions {
  bool bins = false;
  std::vector<double> edges = default_ratio_edges();
  std::optional<std::filesystem::path> csv;
  std::size_t jobs = 0;
};

struct CaiCheckOptions {
  std::size_t height = 2, width = 2, channels = 8, trials = 10;
  std::uint64_t seed = 0;
  bool break_jvp = false;
};

struct LossesDemoOptions {
  LossWeights weights;
  std::size_t radius = 3;
  std::optional<std::filesystem::path> params_file;
  LossComponents components{1.0, 1.0, 1.0, 1.0};  // used when no manifest is given
};

namespace detail {

inline nlohmann::json params_json(const std::optional<ShadowParams>& p) {
  return p ? nlohmann::json(*p) : nlohmann::json(nullptr);
}

inline std::string dump_pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

template <typename Body>
int guarded(std::ostream& log, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    log << "error: malformed JSON: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

/// Test pairs (and optionally training samples) for every scene under
/// `scenes_dir`. Scenes are processed independently; output order is by scene
/// directory name, then pair index.
inline int cmd_synth(const std::filesystem::path& scenes_dir, const std::filesystem::path& out_dir,
                     const SynthOptions& opt, std::ostream& out, std::ostream& log) {
  return detail::guarded(log, [&] {
    if (opt.size == 0) throw InvalidArgument("--size must be positive");
    const std::vector<SceneAnnotation> scenes = load_scenes(scenes_dir);
    log << "loaded " << scenes.size() << " scenes from " << scenes_dir.string() << "\n";

    std::vector<std::vector<CompositeSample>> test(scenes.size()), train(scenes.size());
    parallel_for(scenes.size(), opt.jobs, [&](std::size_t i) {
      test[i] = build_test_pairs({scenes[i]}, opt.min_ratio, opt.size);
      if (opt.train_per_scene > 0) {
        const std::uint64_t scene_seed = opt.seed + 0x9E3779B97F4A7C15ull * (i + 1);
        train[i] = enumerate_training_samples(resize_scene(scenes[i], opt.size), scene_seed, opt.train_per_scene);
      }
    });
    auto flatten = [](std::vector<std::vector<CompositeSample>>& parts) {
      std::vector<CompositeSample> all;
      for (auto& p : parts)
        for (auto& s : p) all.push_back(std::move(s));
      return all;
    };
    const std::vector<CompositeSample> test_samples = flatten(test);
    std::size_t candidates = 0;
    for (const auto& s : scenes) candidates += s.pairs.size();

    const DatasetManifest m = write_manifest(test_samples, out_dir);
    nlohmann::json summary = {{"manifest", m.path.string()},
                              {"scenes", scenes.size()},
                              {"candidates", candidates},
                              {"dropped_small_shadow", candidates - test_samples.size()},
                              {"samples", test_samples.size()}};
    std::map<std::string, std::size_t> per_split{{to_string(Split::Bos), 0}, {to_string(Split::BosFree), 0}};
    for (const auto& s : test_samples) ++per_split[to_string(s.split)];
    summary["splits"] = per_split;

    const auto& edges = default_ratio_edges();
    std::vector<std::size_t> hist(edges.size() - 1, 0);
    for (const auto& s : test_samples) ++hist[ratio_bin_index(s.ratio(), edges)];
    nlohmann::json h = nlohmann::json::array();
    for (std::size_t j = 0; j < hist.size(); ++j)
      h.push_back({{"lower", edges[j]}, {"upper", edges[j + 1]}, {"count", hist[j]}});
    summary["ratio_histogram"] = h;

    if (opt.train_per_scene > 0) {
      const DatasetManifest tm = write_manifest(flatten(train), out_dir / "train");
      summary["train"] = {{"manifest", tm.path.string()}, {"samples", tm.entries.size()}};
    }
    out << detail::dump_pretty(summary);
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// estimate

inline constexpr const char* kParamsFormat = "shadowcomp-params/1";

struct ParamsTable {
  std::vector<std::string> keys;
  std::map<std::string, std::optional<ShadowParams>> by_key;
};

inline nlohmann::json to_json(const ParamsTable& t) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& k : t.keys) samples.push_back({{"key", k}, {"shadow_params", detail::params_json(t.by_key.at(k))}});
  return {{"format", kParamsFormat}, {"samples", samples}};
}

inline ParamsTable read_params_table(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open params file " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string{}) != kParamsFormat) throw ValidationError(path.string() + ": not a params file");
  ParamsTable t;
  for (const auto& s : j.at("samples")) {
    const auto key = s.at("key").get<std::string>();
    std::optional<ShadowParams> p;
    if (!s.at("shadow_params").is_null()) p = s.at("shadow_params").get<ShadowParams>();
    t.keys.push_back(key);
    t.by_key[key] = p;
  }
  return t;
}

/// Regresses shadow parameters for every sample from its stored composite,
/// target and foreground shadow mask.
inline ParamsTable estimate_manifest(const std::vector<LoadedSample>& samples, std::size_t jobs) {
  std::vector<std::optional<ShadowParams>> params(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const CompositeSample& s = samples[i].sample;
    params[i] = ground_truth_params(s.composite, s.target, s.fg_shadow);
  });
  ParamsTable t;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    t.keys.push_back(samples[i].record.key);
    t.by_key[samples[i].record.key] = params[i];
  }
  return t;
}

/// Writes the table to `out_file` when given, else prints it.
inline int cmd_estimate(const std::filesystem::path& manifest, const std::optional<std::filesystem::path>& out_file,
                        const EstimateOptions& opt, std::ostream& out, std::ostream& log) {
  return detail::guarded(log, [&] {
    const auto samples = read_manifest(manifest);
    const ParamsTable t = estimate_manifest(samples, opt.jobs);
    const nlohmann::json j = to_json(t);
    if (out_file) {
      if (out_file->has_parent_path()) std::filesystem::create_directories(out_file->parent_path());
      write_text_file(*out_file, detail::dump_pretty(j));
      std::size_t estimated = 0;
      for (const auto& [k, p] : t.by_key) estimated += p.has_value();
      out << detail::dump_pretty({{"params", out_file->string()},
                                  {"samples", t.keys.size()},
                                  {"estimated", estimated},
                                  {"null", t.keys.size() - estimated}});
    } else {
      out << detail::dump_pretty(j);
    }
    log << "estimated parameters for " << t.keys.size() << " samples\n";
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// fill

/// Procedural shadow fill of one composite. Null parameters leave the
/// composite untouched.
inline Image procedural_fill(const CompositeSample& s, const std::optional<ShadowParams>& p, std::size_t radius) {
  if (!p) return s.composite;
  return fill_shadow(s.composite, *p, synthesize_matte(s.fg_shadow, radius));
}

inline std::filesystem::path prediction_path(const std::filesystem::path& dir, const std::string& key) {
  return dir / (key + ".png");
}

/// Writes <out_dir>/<key>.png per sample. Parameters come from `params_file`
/// (estimate output) or, when absent, from the manifest records.
inline int cmd_fill(const std::filesystem::path& manifest, const std::optional<std::filesystem::path>& params_file,
                    const std::filesystem::path& out_dir, const FillOptions& opt, std::ostream& out,
                    std::ostream& log) {
  return detail::guarded(log, [&] {
    const auto samples = read_manifest(manifest);
    std::vector<std::optional<ShadowParams>> params(samples.size());
    if (params_file) {
      const ParamsTable t = read_params_table(*params_file);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto it = t.by_key.find(samples[i].record.key);
        if (it == t.by_key.end()) {
          throw ValidationError("missing params for sample " + samples[i].record.key + " in " + params_file->string());
        }
        params[i] = it->second;
      }
    } else {
      for (std::size_t i = 0; i < samples.size(); ++i) params[i] = samples[i].record.shadow_params;
    }
    std::filesystem::create_directories(out_dir);
    parallel_for(samples.size(), opt.jobs, [&](std::size_t i) {
      save_image(procedural_fill(samples[i].sample, params[i], opt.radius),
                 prediction_path(out_dir, samples[i].record.key));
    });
    out << detail::dump_pretty({{"predictions", out_dir.string()}, {"samples", samples.size()}, {"radius", opt.radius}});
    log << "filled " << samples.size() << " samples\n";
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// metrics

struct SetEvaluation {
  std::vector<std::string> keys;
  std::vector<Split> splits;
  std::vector<double> ratios;
  std::vector<MetricReport> reports;
};

inline SetEvaluation evaluate_predictions(const std::vector<LoadedSample>& samples,
                                          const std::filesystem::path& predictions_dir, std::size_t jobs) {
  SetEvaluation ev;
  ev.reports.resize(samples.size());
  for (const auto& s : samples) {
    const auto p = prediction_path(predictions_dir, s.record.key);
    if (!std::filesystem::exists(p)) throw IoError("missing prediction for sample " + s.record.key + ": " + p.string());
    ev.keys.push_back(s.record.key);
    ev.splits.push_back(s.record.split);
    ev.ratios.push_back(s.record.ratio);
  }
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const Image pred = load_image(prediction_path(predictions_dir, samples[i].record.key));
    ev.reports[i] = evaluate_pair(pred, samples[i].sample.target, samples[i].sample.fg_shadow);
  });
  return ev;
}

/// Per-split and overall means. Both split sections are always present; an
/// empty split is null.
inline nlohmann::json evaluation_report(const SetEvaluation& ev, const MetricsOptions& opt) {
  auto select = [&](std::optional<Split> split) {
    std::vector<RatedReport> rated;
    for (std::size_t i = 0; i < ev.reports.size(); ++i)
      if (!split || ev.splits[i] == *split) rated.push_back({ev.ratios[i], ev.reports[i]});
    return rated;
  };
  auto reports_of = [](const std::vector<RatedReport>& rated) {
    std::vector<MetricReport> r;
    for (const auto& x : rated) r.push_back(x.report);
    return r;
  };
  auto binned = [&](const std::vector<RatedReport>& rated) {
    std::vector<RatedReport> in_range;
    std::size_t outside = 0;
    for (const auto& r : rated) {
      if (r.ratio > opt.edges.front() && r.ratio <= opt.edges.back()) {
        in_range.push_back(r);
      } else {
        ++outside;
      }
    }
    return nlohmann::json{{"bins", to_json(bin_by_shadow_ratio(in_range, opt.edges))}, {"unbinned", outside}};
  };

  nlohmann::json report = {{"samples", ev.reports.size()}};
  nlohmann::json splits = nlohmann::json::object();
  nlohmann::json bins = nlohmann::json::object();
  for (Split s : {Split::Bos, Split::BosFree}) {
    const auto rated = select(s);
    nlohmann::json section = to_json(aggregate(reports_of(rated)));
    if (!section.is_null()) section["count"] = rated.size();
    splits[to_string(s)] = section;
    if (opt.bins) bins[to_string(s)] = binned(rated);
  }
  report["splits"] = splits;
  const auto all = select(std::nullopt);
  report["overall"] = to_json(aggregate(reports_of(all)));
  if (opt.bins) {
    bins["overall"] = binned(all);
    report["ratio_bins"] = bins;
  }
  return report;
}

inline std::string evaluation_csv(const SetEvaluation& ev) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "key,split,ratio,grmse,lrmse,gssim,lssim\n";
  for (std::size_t i = 0; i < ev.reports.size(); ++i) {
    const auto& r = ev.reports[i];
    os << ev.keys[i] << ',' << to_string(ev.splits[i]) << ',' << ev.ratios[i] << ',' << r.grmse << ',';
    if (r.lrmse) os << *r.lrmse;
    os << ',' << r.gssim << ',';
    if (r.lssim) os << *r.lssim;
    os << '\n';
  }
  return os.str();
}

inline int cmd_metrics(const std::filesystem::path& manifest, const std::filesystem::path& predictions_dir,
                       const MetricsOptions& opt, std::ostream& out, std::ostream& log) {
  return detail::guarded(log, [&] {
    validate_ratio_edges(opt.edges);
    const auto samples = read_manifest(manifest);
    const SetEvaluation ev = evaluate_predictions(samples, predictions_dir, opt.jobs);
    if (opt.csv) write_text_file(*opt.csv, evaluation_csv(ev));
    out << detail::dump_pretty(evaluation_report(ev, opt));
    log << "evaluated " << samples.size() << " predictions\n";
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// cai-check, arch-validate

inline int cmd_cai_check(const CaiCheckOptions& opt, std::ostream& out, std::ostream& log) {
  return detail::guarded(log, [&] {
    const cai::GradCheckReport r =
        cai::grad_check_report(opt.height, opt.width, opt.channels, opt.trials, opt.seed, opt.break_jvp);
    out << detail::dump_pretty(cai::to_json(r));
    if (!r.passed) log << "gradient check failed: max relative error " << r.max_relative_error << "\n";
    return r.passed ? int{kExitOk} : int{kExitCheckFailed};
  });
}

inline int cmd_arch_validate(std::ostream& out, std::ostream& log) {
  return detail::guarded(log, [&] {
    const arch::ValidationSummary s = arch::validate_all();
    out << detail::dump_pretty(arch::to_json(s));
    for (const auto& n : s.networks)
      for (const auto& f : n.failures) log << f << "\n";
    return s.all_pass() ? int{kExitOk} : int{kExitCheckFailed};
  });
}

// ---------------------------------------------------------------------------
// losses-demo

inline nlohmann::json to_json(const LossComponents& l) {
  return {{"mask", l.mask}, {"image", l.image}, {"param", l.param}, {"adversarial", l.adversarial}};
}

inline nlohmann::json to_json(const LossWeights& w) {
  return {{"lambda_s", w.lambda_s}, {"lambda_i", w.lambda_i}, {"lambda_p", w.lambda_p}, {"lambda_gd", w.lambda_gd}};
}

/// Loss terms of the procedural baseline on one sample: the blurred mask
/// stands in for the predicted mask, `pred` for predicted parameters and the
/// fill for the generated image. There is no discriminator, so the
/// adversarial term is zero.
inline LossComponents procedural_losses(const CompositeSample& s, const std::optional<ShadowParams>& gt,
                                        const std::optional<ShadowParams>& pred, std::size_t radius) {
  LossComponents l;
  const ShadowMatte matte = synthesize_matte(s.fg_shadow, radius);
  l.mask = mask_loss(matte, s.fg_shadow);
  l.param = param_loss(pred.value_or(ShadowParams::identity()), gt.value_or(ShadowParams::identity()));
  l.image = image_loss(procedural_fill(s, pred, radius), s.target);
  return l;
}

inline int cmd_losses_demo(const std::optional<std::filesystem::path>& manifest, const LossesDemoOptions& opt,
                           std::ostream& out, std::ostream& log) {
  return detail::guarded(log, [&] {
    opt.weights.validate();
    nlohmann::json report = {{"weights", to_json(opt.weights)}};
    if (!manifest) {
      report["components"] = to_json(opt.components);
      report["generator_objective"] = generator_objective(opt.components, opt.weights);
      out << detail::dump_pretty(report);
      return int{kExitOk};
    }
    const auto samples = read_manifest(*manifest);
    std::optional<ParamsTable> table;
    if (opt.params_file) table = read_params_table(*opt.params_file);
    nlohmann::json per = nlohmann::json::array();
    LossComponents mean;
    for (const auto& ls : samples) {
      std::optional<ShadowParams> pred = ls.record.shadow_params;
      if (table) {
        const auto it = table->by_key.find(ls.record.key);
        if (it == table->by_key.end()) throw ValidationError("missing params for sample " + ls.record.key);
        pred = it->second;
      }
      const LossComponents l = procedural_losses(ls.sample, ls.record.shadow_params, pred, opt.radius);
      per.push_back({{"key", ls.record.key},
                     {"components", to_json(l)},
                     {"generator_objective", generator_objective(l, opt.weights)}});
      mean.mask += l.mask;
      mean.image += l.image;
      mean.param += l.param;
    }
    if (!samples.empty()) {
      const auto n = static_cast<double>(samples.size());
      mean.mask /= n;
      mean.image /= n;
      mean.param /= n;
      report["mean_components"] = to_json(mean);
      report["mean_generator_objective"] = generator_objective(mean, opt.weights);
    } else {
      report["mean_components"] = nullptr;
      report["mean_generator_objective"] = nullptr;
    }
    report["adversarial"] = "no discriminator in the procedural baseline; term fixed at 0";
    report["samples"] = per;
    out << detail::dump_pretty(report);
    return int{kExitOk};
  });
}

}  // namespace shadowcomp
