#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rootseg/image.hpp"
#include "rootseg/image_io.hpp"

namespace rootseg {

/// Parameters of the synthetic plate generator.
struct SynthParams {
  int width = 256;
  int height = 256;
  int n_laterals = 3;
  double main_root_wobble = 8.0;      ///< heading std-dev per step, degrees
  double lateral_angle_range = 50.0;  ///< lateral departure cone, degrees
  double root_intensity = 180.0;
  double background_intensity = 20.0;
  double noise_sigma = 8.0;
  int leaf_radius = 0;     ///< 0 = no leaf blobs
  int stroke_width = 2;    ///< rendered root band width, pixels; must stay below
                           ///< the 3x3 leaf-removal element or the top-hat
                           ///< suppresses the roots themselves

  void validate() const {
    if (width < 16 || height < 16) throw InvalidParams("synth: extents must be >= 16");
    if (n_laterals < 0) throw InvalidParams("synth: n_laterals must be >= 0");
    if (!(root_intensity > background_intensity))
      throw InvalidParams("synth: root_intensity must exceed background_intensity");
    if (root_intensity > 255.0 || background_intensity < 0.0)
      throw InvalidParams("synth: intensities must lie in [0, 255]");
    if (noise_sigma < 0.0) throw InvalidParams("synth: noise_sigma must be >= 0");
    if (main_root_wobble < 0.0 || lateral_angle_range < 0.0)
      throw InvalidParams("synth: angles must be >= 0");
    if (leaf_radius < 0) throw InvalidParams("synth: leaf_radius must be >= 0");
    if (stroke_width < 1) throw InvalidParams("synth: stroke_width must be >= 1");
  }
};

namespace detail {

// All draws go through mt19937 with hand-rolled transforms so the generated
// suites are bit-identical across standard libraries.
class SynthRng {
 public:
  explicit SynthRng(std::uint32_t seed) : gen_(seed) {}

  double uniform() { return gen_() * (1.0 / 4294967296.0); }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint32_t uniform_int(std::uint32_t n) { return gen_() % n; }

  double gauss(double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937 gen_;
};

struct Px {
  int x = 0;
  int y = 0;
  bool operator==(const Px&) const = default;
};

inline int cheb(const Px& a, const Px& b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

// Appends a pixel to an 8-connected path, dropping trailing pixels made
// redundant by diagonal shortcuts. Keeps non-consecutive path pixels from
// being 8-adjacent, so the centerline has no staircase corners that would
// read as junctions.
inline void append_simplified(std::vector<Px>& path, const Px& q) {
  if (!path.empty() && q == path.back()) return;
  while (path.size() >= 2 && cheb(path[path.size() - 2], q) <= 1) path.pop_back();
  path.push_back(q);
}

inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

}  // namespace detail

/// Deterministic synthetic root image with its exact centerline as ground
/// truth. The main root is a seeded random walk from the top-center
/// downward; laterals attach at locally diagonal main-root steps so each
/// contributes exactly one junction pixel, and they stop before touching any
/// previously drawn path. Leaves render as bright ellipse blobs that are not
/// part of the ground truth.
inline std::pair<GrayImage, BinaryMask> generate(const SynthParams& params, std::uint32_t seed) {
  params.validate();
  detail::SynthRng rng(seed);
  const int w = params.width, h = params.height;

  // main root walk
  std::vector<detail::Px> main_path;
  {
    double x = w / 2.0 + rng.uniform(-w / 16.0, w / 16.0);
    double y = 0.0;
    double heading = 90.0;  // straight down; y grows downward
    while (true) {
      const detail::Px p{static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
      if (p.x < 1 || p.x >= w - 1 || p.y >= h) break;
      detail::append_simplified(main_path, p);
      heading = std::clamp(heading + rng.gauss(params.main_root_wobble), 30.0, 150.0);
      x += std::cos(heading * detail::kDegToRad);
      y += std::sin(heading * detail::kDegToRad);
    }
  }
  if (main_path.size() < 4) throw InvalidParams("synth: image too small for a root walk");

  BinaryMask gt(w, h);
  for (const auto& p : main_path) gt.at(p.y, p.x) = 1;

  // anchor candidates: positions where the main root runs diagonally, so a
  // perpendicular first lateral step touches only the anchor
  struct Anchor {
    int path_idx;
    int diag_sign;  // x-direction of the main root's diagonal step
  };
  std::vector<Anchor> candidates;
  for (size_t i = 1; i + 1 < main_path.size(); ++i) {
    const int dx_in = main_path[i].x - main_path[i - 1].x;
    const int dy_in = main_path[i].y - main_path[i - 1].y;
    const int dx_out = main_path[i + 1].x - main_path[i].x;
    const int dy_out = main_path[i + 1].y - main_path[i].y;
    if (std::abs(dx_in) == 1 && dy_in == 1 && dx_out == dx_in && dy_out == 1)
      candidates.push_back({static_cast<int>(i), dx_in});
  }

  auto collides = [&gt, w, h](const detail::Px& q, const detail::Px& prev) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int xx = q.x + dx, yy = q.y + dy;
        if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
        if (!gt.at(yy, xx)) continue;
        if (xx == prev.x && yy == prev.y) continue;
        return true;
      }
    return false;
  };

  std::vector<char> used(candidates.size(), 0);
  const int bands = std::max(params.n_laterals, 1);
  for (int li = 0; li < params.n_laterals && !candidates.empty(); ++li) {
    bool done = false;
    for (int attempt = 0; attempt < 40 && !done; ++attempt) {
      // prefer one lateral per depth band, falling back to any candidate
      size_t lo = candidates.size() * li / bands;
      size_t hi = std::max(lo + 1, candidates.size() * (li + 1) / bands);
      if (attempt >= 20) {
        lo = 0;
        hi = candidates.size();
      }
      const size_t ci = lo + rng.uniform_int(static_cast<std::uint32_t>(hi - lo));
      if (used[ci]) continue;
      const Anchor& a = candidates[ci];
      const detail::Px anchor = main_path[a.path_idx];
      const int side = -a.diag_sign;  // laterals leave opposite the diagonal
      const detail::Px first{anchor.x + side, anchor.y + 1};
      if (first.x < 1 || first.x >= w - 1 || first.y >= h - 1) continue;
      if (collides(first, anchor)) continue;

      std::vector<detail::Px> lat{first};
      double x = first.x, y = first.y;
      double heading = side > 0 ? rng.uniform(20.0, std::min(20.0 + params.lateral_angle_range, 75.0))
                                : 180.0 - rng.uniform(20.0, std::min(20.0 + params.lateral_angle_range, 75.0));
      const double lo_h = side > 0 ? 15.0 : 105.0;
      const double hi_h = side > 0 ? 75.0 : 165.0;
      const int target_len = h / 8 + static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(h / 4)));
      while (static_cast<int>(lat.size()) < target_len) {
        heading = std::clamp(heading + rng.gauss(params.main_root_wobble), lo_h, hi_h);
        x += std::cos(heading * detail::kDegToRad);
        y += std::sin(heading * detail::kDegToRad);
        const detail::Px q{static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
        if (q == lat.back()) continue;
        if (q.x < 1 || q.x >= w - 1 || q.y >= h - 1) break;
        if (collides(q, lat.back())) break;
        detail::append_simplified(lat, q);
      }
      if (static_cast<int>(lat.size()) < 5) continue;
      for (const auto& p : lat) gt.at(p.y, p.x) = 1;
      used[ci] = 1;
      done = true;
    }
  }

  // render: stroke a square brush of side stroke_width along the centerline
  GrayImage img(w, h, params.background_intensity);
  {
    const int lo = -(params.stroke_width - 1) / 2;
    const int hi = params.stroke_width / 2;
    for (int ry = 0; ry < h; ++ry)
      for (int cx = 0; cx < w; ++cx) {
        if (!gt.at(ry, cx)) continue;
        for (int dy = lo; dy <= hi; ++dy)
          for (int dx = lo; dx <= hi; ++dx) {
            const int yy = ry + dy, xx = cx + dx;
            if (yy >= 0 && yy < h && xx >= 0 && xx < w) img.at(yy, xx) = params.root_intensity;
          }
      }
  }

  if (params.leaf_radius > 0 && !main_path.empty()) {
    const detail::Px top = main_path.front();
    for (int side : {-1, 1}) {
      const double cx = top.x + side * (params.leaf_radius + 2.0 + rng.uniform(0.0, 2.0));
      const double cy = top.y + params.leaf_radius * 0.8 + rng.uniform(0.0, 2.0);
      const double a = params.leaf_radius;
      const double b = std::max(2.0, params.leaf_radius * 0.6);
      for (int ry = 0; ry < h; ++ry)
        for (int xx = 0; xx < w; ++xx) {
          const double ex = (xx - cx) / a, ey = (ry - cy) / b;
          if (ex * ex + ey * ey <= 1.0) img.at(ry, xx) = params.root_intensity;
        }
    }
  }

  if (params.noise_sigma > 0.0)
    for (double& v : img.data) v += rng.gauss(params.noise_sigma);
  for (double& v : img.data) v = std::clamp(v, 0.0, 255.0);

  return {std::move(img), std::move(gt)};
}

/// Writes n image/ground-truth pairs plus an evaluation manifest whose
/// pred_path column anticipates the pipeline's `<id>_skeleton.png` outputs.
/// Returns the manifest path. Pair i uses seed + i.
inline std::string generate_suite(int n, const SynthParams& params, std::uint32_t seed,
                                  const std::string& out_dir) {
  if (n < 0) throw InvalidParams("generate_suite: n must be >= 0");
  std::filesystem::create_directories(out_dir);
  const std::string manifest_path = (std::filesystem::path(out_dir) / "manifest.csv").string();
  std::ofstream manifest(manifest_path);
  if (!manifest) throw IoFailure("cannot open " + manifest_path + " for writing");
  manifest << "image_id,class,pred_path,ref_path\n";
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%03d", i);
    const auto [img, gt] = generate(params, seed + static_cast<std::uint32_t>(i));
    save_image(img, (std::filesystem::path(out_dir) / (std::string(id) + ".png")).string());
    save_mask(gt, (std::filesystem::path(out_dir) / (std::string(id) + "_gt.png")).string());
    manifest << id << ",synth," << id << "_skeleton.png," << id << "_gt.png\n";
  }
  return manifest_path;
}

}  // namespace rootseg
