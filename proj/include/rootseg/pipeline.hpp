#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "rootseg/crf.hpp"
#include "rootseg/image.hpp"
#include "rootseg/image_io.hpp"
#include "rootseg/line_detector.hpp"
#include "rootseg/morphology.hpp"
#include "rootseg/skeleton.hpp"

namespace rootseg {

/// Everything one batch run needs: inputs, the per-module parameter blocks,
/// and output/flag plumbing.
struct PipelineConfig {
  std::vector<std::string> inputs;
  std::optional<CropRect> crop;
  LineDetectorParams line;
  CrfParams crf;  // theta_x <= 0 requests per-image estimation
  int alpha = 20;
  int tolerance_px = 0;  // forwarded to evaluation when requested
  std::string out_dir = "out";
  std::uint32_t seed = 1;
  bool invert_unary = false;
  bool emit_intermediates = false;
};

struct ImageRunResult {
  std::string image_id;
  std::string input_path;
  bool ok = false;
  std::string error;
  std::vector<std::pair<std::string, double>> stage_ms;  // in pipeline order
  std::map<std::string, std::string> outputs;            // artifact name -> path
  double theta_x_used = 0.0;
  int crf_iterations = 0;
  bool crf_converged = false;
};

struct RunSummary {
  std::vector<ImageRunResult> images;
  int failures = 0;
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}

  template <typename F>
  auto time(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(name, t0);
    } else {
      auto result = f();
      record(name, t0);
      return result;
    }
  }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
    const auto dt = std::chrono::steady_clock::now() - t0;
    sink_.emplace_back(name, std::chrono::duration<double, std::milli>(dt).count());
  }

  std::vector<std::pair<std::string, double>>& sink_;
};

inline GrayImage subtract(const GrayImage& a, const GrayImage& b) {
  GrayImage out(a.width, a.height);
  for (int i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

inline void write_summary_json(const ImageRunResult& r, const std::string& path) {
  nlohmann::json j;
  j["image_id"] = r.image_id;
  j["input"] = r.input_path;
  j["ok"] = r.ok;
  if (!r.error.empty()) j["error"] = r.error;
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [name, ms] : r.stage_ms) timings[name] = ms;
  j["stage_timings_ms"] = timings;
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& [name, p] : r.outputs) outputs[name] = p;
  j["output_paths"] = outputs;
  j["theta_x"] = r.theta_x_used;
  j["crf_iterations"] = r.crf_iterations;
  j["crf_converged"] = r.crf_converged;
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

}  // namespace detail

/// Runs crop -> normalize -> leaf removal -> line enhancement -> CRF ->
/// postprocessing on one image, writing the final skeleton, the pre-filter
/// segmentation, and optional intermediates. Stage timings are collected
/// along the way.
inline ImageRunResult process_image(const std::string& input, const std::string& image_id,
                                    const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  ImageRunResult res;
  res.image_id = image_id;
  res.input_path = input;
  detail::StageClock clock(res.stage_ms);
  const auto out_path = [&](const std::string& suffix) {
    return (fs::path(cfg.out_dir) / (image_id + suffix)).string();
  };

  try {
    GrayImage img = clock.time("load", [&] { return load_image(input); });
    if (cfg.crop) img = clock.time("crop", [&] { return crop(img, *cfg.crop); });
    const GrayImage ic = clock.time("normalize", [&] { return normalize_contrast(img); });
    const GrayImage tophat = clock.time("leaf_removal", [&] { return remove_leaves(ic, 3); });
    const StrengthMap enhanced = clock.time("enhance", [&] { return enhance(tophat, cfg.line); });

    CrfParams crf_params = cfg.crf;
    if (crf_params.theta_x <= 0.0)
      crf_params.theta_x =
          clock.time("theta_x", [&] { return estimate_theta_x(enhanced, 10000, cfg.seed); });
    res.theta_x_used = crf_params.theta_x;

    const MeanFieldResult inference = clock.time("crf", [&] {
      return mean_field_infer(enhanced, unary_costs(enhanced, crf_params.w_u, cfg.invert_unary),
                              crf_params);
    });
    res.crf_iterations = inference.iterations;
    res.crf_converged = inference.converged;

    BinaryMask crf_mask, segmentation, skeleton_raw, skeleton;
    clock.time("postprocess", [&] {
      crf_mask = map_labels(inference.marginals);
      segmentation = fill_gaps(crf_mask);
      skeleton_raw = skeletonize(segmentation);
      skeleton = filter_small(skeleton_raw, cfg.alpha);
    });

    clock.time("write", [&] {
      save_mask(skeleton, out_path("_skeleton.png"));
      res.outputs["skeleton"] = out_path("_skeleton.png");
      save_mask(segmentation, out_path("_segmentation.png"));
      res.outputs["segmentation"] = out_path("_segmentation.png");
      if (cfg.emit_intermediates) {
        save_image(ic, out_path("_ic.png"));
        res.outputs["ic"] = out_path("_ic.png");
        const GrayImage leaves = open(ic, 3);
        save_image(leaves, out_path("_leaves.png"));
        res.outputs["leaves"] = out_path("_leaves.png");
        save_image(detail::subtract(ic, leaves), out_path("_tophat.png"));
        res.outputs["tophat"] = out_path("_tophat.png");
        save_image(rescale_for_display(enhanced), out_path("_enhanced.png"));
        res.outputs["enhanced"] = out_path("_enhanced.png");
        GrayImage marg(inference.marginals.width, inference.marginals.height);
        for (int i = 0; i < marg.size(); ++i) marg.data[i] = 255.0 * inference.marginals.q_fg[i];
        save_image(marg, out_path("_marginals.png"));
        res.outputs["marginals"] = out_path("_marginals.png");
        save_mask(crf_mask, out_path("_crf_mask.png"));
        res.outputs["crf_mask"] = out_path("_crf_mask.png");
      }
    });

    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }

  try {
    detail::write_summary_json(res, out_path("_summary.json"));
    res.outputs["summary"] = out_path("_summary.json");
  } catch (const std::exception& e) {
    if (res.ok) {
      res.ok = false;
      res.error = e.what();
    }
  }
  return res;
}

/// Batch driver. One bad input does not abort the batch; failures are
/// reported per image.
inline RunSummary run_pipeline(const PipelineConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  RunSummary summary;
  std::map<std::string, int> seen;
  for (const std::string& input : cfg.inputs) {
    std::string id = std::filesystem::path(input).stem().string();
    if (id.empty()) id = "image";
    const int n = seen[id]++;
    if (n > 0) id += "_" + std::to_string(n + 1);
    summary.images.push_back(process_image(input, id, cfg));
    if (!summary.images.back().ok) ++summary.failures;
  }
  return summary;
}

}  // namespace rootseg
