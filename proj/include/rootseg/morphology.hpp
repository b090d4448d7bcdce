#pragma once

#include <algorithm>
#include <limits>

#include "rootseg/image.hpp"

namespace rootseg {

namespace detail {

inline void check_se(int se_side) {
  if (se_side < 1 || se_side % 2 == 0)
    throw InvalidStructuringElement("structuring element side must be odd and >= 1, got " +
                                    std::to_string(se_side));
}

// Window min/max with replicate-edge padding. Square structuring elements
// only; the interior takes an unclamped fast path.
template <bool TakeMin>
GrayImage window_extremum(const GrayImage& img, int se_side) {
  check_se(se_side);
  if (img.empty()) throw EmptyImage("morphology: empty image");
  const int h = se_side / 2;
  GrayImage out(img.width, img.height);
  for (int r = 0; r < img.height; ++r) {
    const bool row_interior = r >= h && r + h < img.height;
    for (int c = 0; c < img.width; ++c) {
      double best = TakeMin ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      if (row_interior && c >= h && c + h < img.width) {
        for (int dr = -h; dr <= h; ++dr)
          for (int dc = -h; dc <= h; ++dc) {
            const double v = img.at(r + dr, c + dc);
            best = TakeMin ? std::min(best, v) : std::max(best, v);
          }
      } else {
        for (int dr = -h; dr <= h; ++dr)
          for (int dc = -h; dc <= h; ++dc) {
            const double v = img.at_clamped(r + dr, c + dc);
            best = TakeMin ? std::min(best, v) : std::max(best, v);
          }
      }
      out.at(r, c) = best;
    }
  }
  return out;
}

}  // namespace detail

/// Grayscale erosion: window minimum over the se_side x se_side square
/// centered at each pixel, replicate-edge padding.
inline GrayImage erode(const GrayImage& img, int se_side) {
  return detail::window_extremum<true>(img, se_side);
}

/// Grayscale dilation: window maximum, dual of erode.
inline GrayImage dilate(const GrayImage& img, int se_side) {
  return detail::window_extremum<false>(img, se_side);
}

/// Morphological opening (erode then dilate). Anti-extensive:
/// open(img)(p) <= img(p) everywhere.
inline GrayImage open(const GrayImage& img, int se_side) {
  return dilate(erode(img, se_side), se_side);
}

/// Morphological closing (dilate then erode). Extensive.
inline GrayImage close(const GrayImage& img, int se_side) {
  return erode(dilate(img, se_side), se_side);
}

/// White top-hat: img minus its opening. Suppresses blob-like bright
/// structures (leaves) while keeping structures thinner than the element
/// (roots). Input is expected to be the contrast-normalized image.
inline GrayImage remove_leaves(const GrayImage& img, int se_side = 3) {
  GrayImage opened = open(img, se_side);
  GrayImage out(img.width, img.height);
  for (int i = 0; i < img.size(); ++i) out.data[i] = img.data[i] - opened.data[i];
  return out;
}

// Binary morphology, same square elements and replicate padding. Used by the
// postprocessing closing and the evaluation tolerance dilation.

inline BinaryMask binary_dilate(const BinaryMask& mask, int se_side) {
  detail::check_se(se_side);
  if (mask.empty()) throw EmptyImage("binary_dilate: empty mask");
  const int h = se_side / 2;
  BinaryMask out(mask.width, mask.height);
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      std::uint8_t v = 0;
      for (int dr = -h; dr <= h && !v; ++dr)
        for (int dc = -h; dc <= h && !v; ++dc) {
          const int rr = std::clamp(r + dr, 0, mask.height - 1);
          const int cc = std::clamp(c + dc, 0, mask.width - 1);
          v = mask.at(rr, cc);
        }
      out.at(r, c) = v;
    }
  return out;
}

inline BinaryMask binary_erode(const BinaryMask& mask, int se_side) {
  detail::check_se(se_side);
  if (mask.empty()) throw EmptyImage("binary_erode: empty mask");
  const int h = se_side / 2;
  BinaryMask out(mask.width, mask.height);
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      std::uint8_t v = 1;
      for (int dr = -h; dr <= h && v; ++dr)
        for (int dc = -h; dc <= h && v; ++dc) {
          const int rr = std::clamp(r + dr, 0, mask.height - 1);
          const int cc = std::clamp(c + dc, 0, mask.width - 1);
          v = mask.at(rr, cc);
        }
      out.at(r, c) = v;
    }
  return out;
}

inline BinaryMask binary_close(const BinaryMask& mask, int se_side) {
  return binary_erode(binary_dilate(mask, se_side), se_side);
}

}  // namespace rootseg
