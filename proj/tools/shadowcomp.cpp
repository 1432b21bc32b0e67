// shadowcomp: dataset synthesis, procedural shadow fill, evaluation and
// self-checks from the command line.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "shadowcomp/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace shadowcomp;

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

// SHADOWCOMP_SEED wins over --seed when set.
bool apply_seed_env(std::uint64_t& seed) {
  const char* env = std::getenv("SHADOWCOMP_SEED");
  if (!env || !*env) return true;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) return false;
    seed = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shadow generation toolkit: paired-data synthesis, procedural shadow fill, metrics and checks"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t jobs = 0;
  app.add_option("--jobs,-j", jobs, "Worker threads for per-sample work (0 = all cores)")->capture_default_str();

  // synth
  std::string scenes_dir, synth_out;
  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Build composite test pairs (and optional training samples) from scenes");
  c_synth->add_option("scenes_dir", scenes_dir, "Directory with one sub-directory per scene")->required();
  c_synth->add_option("out_dir", synth_out, "Output directory for assets and manifest.jsonl")->required();
  c_synth->add_option("--size", synth.size, "Square output size in pixels")->capture_default_str()->check(CLI::PositiveNumber);
  c_synth->add_option("--min-ratio", synth.min_ratio, "Drop test pairs whose shadow ratio is <= this")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--seed", synth.seed, "Seed for training-subset sampling")->capture_default_str();
  c_synth->add_option("--train-per-scene", synth.train_per_scene,
                      "Also write this many random-subset training samples per scene under out_dir/train")
      ->capture_default_str();

  // estimate
  std::string est_manifest, est_out;
  auto* c_est = app.add_subcommand("estimate", "Regress shadow parameters for every sample of a manifest");
  c_est->add_option("manifest", est_manifest, "manifest.jsonl")->required();
  c_est->add_option("--out,-o", est_out, "Write the parameter table here instead of stdout");

  // fill
  std::string fill_manifest, fill_out, fill_params;
  FillOptions fill;
  auto* c_fill = app.add_subcommand("fill", "Procedural (non-learned) shadow fill of every composite");
  c_fill->add_option("manifest", fill_manifest, "manifest.jsonl")->required();
  c_fill->add_option("out_dir", fill_out, "Directory for <key>.png predictions")->required();
  c_fill->add_option("--params", fill_params, "Parameter table from `estimate` (default: manifest parameters)");
  c_fill->add_option("--radius", fill.radius, "Penumbra radius in box-blur passes")->capture_default_str();

  // metrics
  std::string met_manifest, met_pred, met_csv;
  MetricsOptions met;
  auto* c_met = app.add_subcommand("metrics", "GRMSE/LRMSE/GSSIM/LSSIM per split");
  c_met->add_option("manifest", met_manifest, "manifest.jsonl")->required();
  c_met->add_option("predictions_dir", met_pred, "Directory with <key>.png predictions")->required();
  c_met->add_flag("--bins", met.bins, "Add a breakdown by foreground shadow ratio");
  c_met->add_option("--edges", met.edges, "Ratio bin edges")->delimiter(',')->capture_default_str();
  c_met->add_option("--csv", met_csv, "Also write per-sample metrics as CSV");

  // cai-check
  CaiCheckOptions cai;
  auto* c_cai = app.add_subcommand("cai-check", "Cross-attention JVP versus central finite differences");
  c_cai->add_option("--height", cai.height)->capture_default_str()->check(CLI::PositiveNumber);
  c_cai->add_option("--width", cai.width)->capture_default_str()->check(CLI::PositiveNumber);
  c_cai->add_option("--channels", cai.channels, "Multiple of 8")->capture_default_str();
  c_cai->add_option("--trials", cai.trials)->capture_default_str();
  c_cai->add_option("--seed", cai.seed)->capture_default_str();
  c_cai->add_flag("--break-jvp", cai.break_jvp)->group("");

  // arch-validate
  auto* c_arch = app.add_subcommand("arch-validate", "Shape-check the built-in network specifications");

  // losses-demo
  std::string ld_manifest, ld_params;
  LossesDemoOptions ld;
  auto* c_ld = app.add_subcommand("losses-demo", "Evaluate the generator objective");
  c_ld->add_option("manifest", ld_manifest, "Optional manifest; without it the --components values are used");
  c_ld->add_option("--params", ld_params, "Parameter table used as the predicted parameters");
  c_ld->add_option("--radius", ld.radius)->capture_default_str();
  c_ld->add_option("--lambda-s", ld.weights.lambda_s)->capture_default_str();
  c_ld->add_option("--lambda-i", ld.weights.lambda_i)->capture_default_str();
  c_ld->add_option("--lambda-p", ld.weights.lambda_p)->capture_default_str();
  c_ld->add_option("--lambda-gd", ld.weights.lambda_gd)->capture_default_str();
  std::vector<double> comps{1.0, 1.0, 1.0, 1.0};
  c_ld->add_option("--components", comps, "mask,image,param,adversarial")->delimiter(',')->expected(4);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!apply_seed_env(synth.seed) || !apply_seed_env(cai.seed)) {
    std::cerr << "error: SHADOWCOMP_SEED must be a nonnegative integer\n";
    return kExitUsage;
  }

  auto& out = std::cout;
  auto& log = std::cerr;
  if (*c_synth) {
    synth.jobs = jobs;
    return cmd_synth(scenes_dir, synth_out, synth, out, log);
  }
  if (*c_est) return cmd_estimate(est_manifest, opt_path(est_out), EstimateOptions{jobs}, out, log);
  if (*c_fill) {
    fill.jobs = jobs;
    return cmd_fill(fill_manifest, opt_path(fill_params), fill_out, fill, out, log);
  }
  if (*c_met) {
    met.jobs = jobs;
    met.csv = opt_path(met_csv);
    return cmd_metrics(met_manifest, met_pred, met, out, log);
  }
  if (*c_cai) return cmd_cai_check(cai, out, log);
  if (*c_arch) return cmd_arch_validate(out, log);
  if (*c_ld) {
    ld.params_file = opt_path(ld_params);
    ld.components = {comps[0], comps[1], comps[2], comps[3]};
    return cmd_losses_demo(opt_path(ld_manifest), ld, out, log);
  }
  return kExitUsage;
}
