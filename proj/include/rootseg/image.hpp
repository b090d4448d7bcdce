#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rootseg {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateRange : Error {
  using Error::Error;
};
struct InvalidStructuringElement : Error {
  using Error::Error;
};
struct InvalidLength : Error {
  using Error::Error;
};
struct InvalidParams : Error {
  using Error::Error;
};
struct OutOfBounds : Error {
  using Error::Error;
};
struct EmptyImage : Error {
  using Error::Error;
};
struct ExtentMismatch : Error {
  using Error::Error;
};
struct OracleTooLarge : Error {
  using Error::Error;
};
struct EmptySkeleton : Error {
  using Error::Error;
};
struct UnsupportedFormat : Error {
  using Error::Error;
};
struct IoFailure : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Rasters
// ---------------------------------------------------------------------------

/// 2D raster of real-valued intensities, row-major. Values are 8-bit range
/// after contrast normalization but may be signed reals at other pipeline
/// stages (line strengths in particular).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw InvalidParams("GrayImage: extents must be >= 1");
  }

  int size() const { return width * height; }
  bool empty() const { return data.empty(); }

  double& at(int row, int col) { return data[static_cast<size_t>(row) * width + col]; }
  double at(int row, int col) const { return data[static_cast<size_t>(row) * width + col]; }

  /// Replicate-edge access: out-of-bounds coordinates clamp to the nearest
  /// edge pixel.
  double at_clamped(int row, int col) const {
    row = std::clamp(row, 0, height - 1);
    col = std::clamp(col, 0, width - 1);
    return at(row, col);
  }

  bool same_extent(const GrayImage& o) const { return width == o.width && height == o.height; }
};

/// Signed line-strength raster; same layout as GrayImage, kept as an alias so
/// morphology and I/O apply unchanged.
using StrengthMap = GrayImage;

/// 2D raster of {foreground, background} labels (1 = foreground), row-major.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill ? 1 : 0) {
    if (w < 1 || h < 1) throw InvalidParams("BinaryMask: extents must be >= 1");
  }

  int size() const { return width * height; }
  bool empty() const { return data.empty(); }

  std::uint8_t& at(int row, int col) { return data[static_cast<size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return data[static_cast<size_t>(row) * width + col]; }

  /// Out-of-bounds coordinates read as background.
  bool at_or_bg(int row, int col) const {
    if (row < 0 || row >= height || col < 0 || col >= width) return false;
    return at(row, col) != 0;
  }

  bool same_extent(const BinaryMask& o) const { return width == o.width && height == o.height; }

  int count_foreground() const {
    int n = 0;
    for (std::uint8_t v : data) n += (v != 0);
    return n;
  }
};

/// Sub-raster selection, used for the per-plant manual crop.
struct CropRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Maps intensities linearly onto [0, 255] so that the minimum lands on 0 and
/// the maximum on 255. Throws DegenerateRange for constant images.
inline GrayImage normalize_contrast(const GrayImage& img) {
  if (img.empty()) throw EmptyImage("normalize_contrast: empty image");
  const auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mx == mn) throw DegenerateRange("normalize_contrast: constant image, max == min");
  GrayImage out(img.width, img.height);
  const double range = mx - mn;
  // dividing per pixel keeps the ratio <= 1, so 0 and 255 are attained
  // exactly and nothing lands outside [0, 255]
  for (int i = 0; i < img.size(); ++i) out.data[i] = 255.0 * ((img.data[i] - mn) / range);
  return out;
}

/// Returns the rect sub-raster. Throws OutOfBounds when the rect does not fit.
inline GrayImage crop(const GrayImage& img, const CropRect& rect) {
  if (rect.w < 1 || rect.h < 1) throw OutOfBounds("crop: rect extents must be >= 1");
  if (rect.x0 < 0 || rect.y0 < 0 || rect.x0 + rect.w > img.width || rect.y0 + rect.h > img.height)
    throw OutOfBounds("crop: rect exceeds image bounds");
  GrayImage out(rect.w, rect.h);
  for (int r = 0; r < rect.h; ++r)
    for (int c = 0; c < rect.w; ++c) out.at(r, c) = img.at(rect.y0 + r, rect.x0 + c);
  return out;
}

}  // namespace rootseg
