#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rootseg/evaluation.hpp"
#include "rootseg/pipeline.hpp"
#include "rootseg/synthetic.hpp"

namespace {

rootseg::CropRect parse_crop(const std::string& spec) {
  rootseg::CropRect rect;
  char extra = 0;
  if (std::sscanf(spec.c_str(), "%d,%d,%d,%d%c", &rect.x0, &rect.y0, &rect.w, &rect.h, &extra) != 4)
    throw CLI::ValidationError("--crop", "expected X,Y,W,H");
  return rect;
}

int cmd_run(rootseg::PipelineConfig cfg, const std::string& crop_spec,
            const std::string& backend) {
  if (!crop_spec.empty()) cfg.crop = parse_crop(crop_spec);
  cfg.crf.backend =
      backend == "exact" ? rootseg::CrfBackend::exact : rootseg::CrfBackend::truncated;

  const rootseg::RunSummary summary = rootseg::run_pipeline(cfg);
  for (const auto& r : summary.images) {
    if (r.ok) {
      double total = 0.0;
      std::printf("%-24s", r.image_id.c_str());
      for (const auto& [stage, ms] : r.stage_ms) {
        std::printf(" %s=%.1fms", stage.c_str(), ms);
        total += ms;
      }
      std::printf(" total=%.1fms (theta_x=%.4g, crf_iters=%d%s)\n", total, r.theta_x_used,
                  r.crf_iterations, r.crf_converged ? "" : ", not converged");
    } else {
      std::printf("%-24s FAILED: %s\n", r.image_id.c_str(), r.error.c_str());
    }
  }
  std::printf("%zu images, %d failed\n", summary.images.size(), summary.failures);
  return summary.failures == 0 ? 0 : 1;
}

int cmd_evaluate(const std::string& manifest, std::string pred_dir, std::string ref_dir,
                 int tolerance_px, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::string manifest_dir = fs::path(manifest).parent_path().string();
  if (pred_dir.empty()) pred_dir = manifest_dir;
  if (ref_dir.empty()) ref_dir = manifest_dir;

  const rootseg::QualityReport report =
      rootseg::evaluate_directory(manifest, pred_dir, ref_dir, tolerance_px);

  fs::create_directories(out_dir);
  rootseg::write_report_json(report, (fs::path(out_dir) / "report.json").string());
  rootseg::write_report_csv(report, (fs::path(out_dir) / "report.csv").string());

  for (const auto& e : report.per_image) {
    if (e.ok())
      std::printf("%-24s %-10s Q=%.4f\n", e.image_id.c_str(), e.class_tag.c_str(), e.q);
    else
      std::printf("%-24s %-10s ERROR: %s\n", e.image_id.c_str(), e.class_tag.c_str(),
                  e.error.c_str());
  }
  for (const auto& cs : report.per_class)
    std::printf("class %-10s n=%-3d mean=%.4f std=%.4f\n", cs.class_tag.c_str(), cs.count,
                cs.mean, cs.stddev);
  std::printf("overall mean=%.4f std=%.4f (%d evaluated, %d failed)\n", report.overall_mean,
              report.overall_std, report.evaluated, report.failed);
  return report.failed == 0 ? 0 : 1;
}

int cmd_synth(int n, const rootseg::SynthParams& params, std::uint32_t seed,
              const std::string& out_dir) {
  const std::string manifest = rootseg::generate_suite(n, params, seed, out_dir);
  std::printf("wrote %d image/ground-truth pairs, manifest %s\n", n, manifest.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rootseg: root architecture segmentation for scanned plate images"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key=value config file; keys live under a [run] section and "
                 "command-line flags override them");

  // --- run ---
  rootseg::PipelineConfig cfg;
  std::string crop_spec;
  std::string backend = "truncated";
  auto* run = app.add_subcommand("run", "segment a batch of images");
  run->add_option("inputs", cfg.inputs, "input images (PGM, PNG, or JPEG)");
  run->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  run->add_option("--crop", crop_spec, "crop rectangle X,Y,W,H (omit to use the full image)");
  run->add_option("--wu", cfg.crf.w_u, "unary weight")->capture_default_str();
  run->add_option("--wp", cfg.crf.w_p, "pairwise weight")->capture_default_str();
  run->add_option("--theta-p", cfg.crf.theta_p, "spatial bandwidth, pixels")
      ->capture_default_str();
  run->add_option("--theta-x", cfg.crf.theta_x,
                  "feature bandwidth (omit or <= 0: estimate per image)");
  run->add_option("--iters", cfg.crf.max_iters, "mean-field iteration budget")
      ->capture_default_str();
  run->add_option("--tol", cfg.crf.tol, "early-stop tolerance on marginals")
      ->capture_default_str();
  run->add_option("--backend", backend, "mean-field backend")
      ->check(CLI::IsMember({"exact", "truncated"}))
      ->capture_default_str();
  run->add_option("--radius", cfg.crf.truncation_radius,
                  "truncation window radius (0: ceil(4 * theta_p))");
  run->add_option("--exact-cap", cfg.crf.exact_pixel_cap,
                  "pixel cap for the exact backend and energy oracle")
      ->capture_default_str();
  run->add_option("--alpha", cfg.alpha, "minimum skeleton segment area")->capture_default_str();
  run->add_option("--seed", cfg.seed, "seed for the theta_x sample")->capture_default_str();
  run->add_option("--tolerance-px", cfg.tolerance_px, "evaluation tolerance, pixels")
      ->capture_default_str();
  run->add_option("--lengths", cfg.line.lengths, "line detector lengths (odd, >= 3)");
  run->add_option("--angles", cfg.line.angles_deg, "line detector angles, degrees in [0,180)");
  run->add_flag("--invert-unary", cfg.invert_unary,
                "literal unary polarity (penalize bright pixels for being root)");
  run->add_flag("--emit-intermediates", cfg.emit_intermediates,
                "also write contrast, leaf, top-hat, enhanced, and marginal images");

  // --- evaluate ---
  std::string manifest, pred_dir, ref_dir, eval_out = "eval";
  int tolerance_px = 0;
  auto* eval = app.add_subcommand("evaluate", "score predictions against reference masks");
  eval->add_option("manifest", manifest, "CSV manifest: image_id,class,pred_path,ref_path")
      ->required();
  eval->add_option("--pred-dir", pred_dir, "base directory for pred_path entries");
  eval->add_option("--ref-dir", ref_dir, "base directory for ref_path entries");
  eval->add_option("--tolerance-px", tolerance_px, "dilate references by this many pixels")
      ->capture_default_str();
  eval->add_option("--out", eval_out, "directory for report.json / report.csv")
      ->capture_default_str();

  // --- synth ---
  rootseg::SynthParams sp;
  int n = 10;
  std::uint32_t synth_seed = 42;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "generate a synthetic suite with ground truth");
  synth->add_option("--n", n, "number of images")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();
  synth->add_option("--seed", synth_seed, "base seed (image i uses seed + i)")
      ->capture_default_str();
  synth->add_option("--width", sp.width)->capture_default_str();
  synth->add_option("--height", sp.height)->capture_default_str();
  synth->add_option("--laterals", sp.n_laterals, "number of lateral roots")
      ->capture_default_str();
  synth->add_option("--wobble", sp.main_root_wobble, "heading std-dev per step, degrees")
      ->capture_default_str();
  synth->add_option("--lateral-angle-range", sp.lateral_angle_range)->capture_default_str();
  synth->add_option("--root-intensity", sp.root_intensity)->capture_default_str();
  synth->add_option("--background-intensity", sp.background_intensity)->capture_default_str();
  synth->add_option("--noise-sigma", sp.noise_sigma)->capture_default_str();
  synth->add_option("--leaf-radius", sp.leaf_radius, "0 disables leaf blobs")
      ->capture_default_str();
  synth->add_option("--stroke-width", sp.stroke_width)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(std::move(cfg), crop_spec, backend);
    if (eval->parsed()) return cmd_evaluate(manifest, pred_dir, ref_dir, tolerance_px, eval_out);
    if (synth->parsed()) return cmd_synth(n, sp, synth_seed, synth_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
