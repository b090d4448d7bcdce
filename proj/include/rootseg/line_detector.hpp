#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "rootseg/image.hpp"

namespace rootseg {

/// Multi-length, multi-orientation configuration. Angles are measured
/// counterclockwise from the +x (column) axis; image y grows downward.
struct LineDetectorParams {
  std::vector<int> lengths = {3, 5, 7, 9, 11, 13, 15};
  std::vector<double> angles_deg = {0, 15, 30, 45, 60, 75, 90, 105, 120, 135, 150, 165};

  void validate() const {
    if (lengths.empty() || angles_deg.empty())
      throw InvalidParams("line detector: lengths and angles must be nonempty");
    for (int l : lengths)
      if (l < 3 || l % 2 == 0)
        throw InvalidLength("line detector: lengths must be odd and >= 3, got " +
                            std::to_string(l));
    for (double a : angles_deg)
      if (a < 0.0 || a >= 180.0)
        throw InvalidParams("line detector: angles must lie in [0, 180)");
  }
};

namespace detail {

// Rounded parametric samples of a centered discrete line; duplicates after
// rounding are kept.
inline std::vector<std::pair<int, int>> line_offsets(int l, double angle_deg) {
  const double rad = angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const int h = (l - 1) / 2;
  std::vector<std::pair<int, int>> offs;
  offs.reserve(l);
  for (int k = -h; k <= h; ++k)
    offs.emplace_back(static_cast<int>(std::lround(-k * sn)),   // row offset
                      static_cast<int>(std::lround(k * cs)));   // col offset
  return offs;
}

}  // namespace detail

/// Line strength at a single length: S_l = L_l - N_l, where L_l is the best
/// oriented-line mean over the given angles and N_l the mean of the l x l
/// window, both with replicate-edge sampling.
inline StrengthMap line_strength(const GrayImage& img, int l,
                                 const std::vector<double>& angles_deg) {
  if (l < 3 || l % 2 == 0)
    throw InvalidLength("line_strength: length must be odd and >= 3, got " + std::to_string(l));
  if (angles_deg.empty()) throw InvalidParams("line_strength: no angles given");
  if (img.empty()) throw EmptyImage("line_strength: empty image");

  std::vector<std::vector<std::pair<int, int>>> tables;
  tables.reserve(angles_deg.size());
  for (double a : angles_deg) tables.push_back(detail::line_offsets(l, a));

  const int h = (l - 1) / 2;
  const double inv_l = 1.0 / l;
  const double inv_win = 1.0 / (static_cast<double>(l) * l);
  StrengthMap out(img.width, img.height);

  for (int r = 0; r < img.height; ++r) {
    const bool row_interior = r >= h && r + h < img.height;
    for (int c = 0; c < img.width; ++c) {
      const bool interior = row_interior && c >= h && c + h < img.width;
      double best_line = -std::numeric_limits<double>::infinity();
      for (const auto& offs : tables) {
        double sum = 0.0;
        if (interior) {
          for (const auto& [dr, dc] : offs) sum += img.at(r + dr, c + dc);
        } else {
          for (const auto& [dr, dc] : offs) sum += img.at_clamped(r + dr, c + dc);
        }
        best_line = std::max(best_line, sum * inv_l);
      }
      double win_sum = 0.0;
      if (interior) {
        for (int dr = -h; dr <= h; ++dr)
          for (int dc = -h; dc <= h; ++dc) win_sum += img.at(r + dr, c + dc);
      } else {
        for (int dr = -h; dr <= h; ++dr)
          for (int dc = -h; dc <= h; ++dc) win_sum += img.at_clamped(r + dr, c + dc);
      }
      out.at(r, c) = best_line - win_sum * inv_win;
    }
  }
  return out;
}

/// Enhanced image: pixelwise maximum of the line strengths over all
/// configured lengths. Values may be negative; no rescaling is applied.
inline StrengthMap enhance(const GrayImage& img, const LineDetectorParams& params = {}) {
  params.validate();
  StrengthMap out = line_strength(img, params.lengths.front(), params.angles_deg);
  for (size_t i = 1; i < params.lengths.size(); ++i) {
    const StrengthMap s = line_strength(img, params.lengths[i], params.angles_deg);
    for (int p = 0; p < out.size(); ++p) out.data[p] = std::max(out.data[p], s.data[p]);
  }
  return out;
}

}  // namespace rootseg
