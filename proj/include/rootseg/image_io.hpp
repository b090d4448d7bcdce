#pragma once

#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "rootseg/image.hpp"

namespace rootseg {

/// Fixed luma weights for color-to-gray conversion, rounded to the nearest
/// integer level.
inline double rgb_to_gray(int r, int g, int b) {
  return static_cast<double>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

namespace detail {

inline std::uint8_t quantize(double v) {
  long q = std::lround(v);
  if (q < 0) q = 0;
  if (q > 255) q = 255;
  return static_cast<std::uint8_t>(q);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

// ---- PGM ----

inline int pgm_next_value(std::istream& in) {
  // Skips whitespace and '#' comments between header tokens.
  while (true) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return in ? value : -1;
}

inline GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  const bool binary = magic[0] == 'P' && magic[1] == '5';
  const bool ascii = magic[0] == 'P' && magic[1] == '2';
  if (!binary && !ascii) throw UnsupportedFormat(path + ": not a PGM file");
  const int w = pgm_next_value(in);
  const int h = pgm_next_value(in);
  const int maxval = pgm_next_value(in);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
    throw UnsupportedFormat(path + ": unsupported PGM header (8-bit only)");
  GrayImage img(w, h);
  if (binary) {
    in.get();  // single whitespace after maxval
    std::vector<std::uint8_t> row(static_cast<size_t>(w));
    for (int r = 0; r < h; ++r) {
      in.read(reinterpret_cast<char*>(row.data()), w);
      if (!in) throw IoFailure(path + ": truncated PGM data");
      for (int c = 0; c < w; ++c) img.at(r, c) = row[c];
    }
  } else {
    for (int i = 0; i < img.size(); ++i) {
      const int v = pgm_next_value(in);
      if (v < 0) throw IoFailure(path + ": truncated PGM data");
      img.data[i] = v;
    }
  }
  return img;
}

inline void save_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<size_t>(img.width));
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) row[c] = quantize(img.at(r, c));
    out.write(reinterpret_cast<const char*>(row.data()), img.width);
  }
  if (!out) throw IoFailure(path + ": write failed");
}

// ---- PNG ----

inline GrayImage load_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoFailure("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoFailure("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoFailure("png_create_info_struct failed");
  }

  // Buffers live outside the setjmp window.
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  GrayImage img;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoFailure(path + ": PNG decode error");
  }

  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormat(path + ": unsupported PNG channel layout");
  }

  pixels.resize(static_cast<size_t>(w) * h * channels);
  rows.resize(h);
  for (png_uint_32 r = 0; r < h; ++r)
    rows[r] = pixels.data() + static_cast<size_t>(r) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = GrayImage(static_cast<int>(w), static_cast<int>(h));
  if (channels == 1) {
    for (int i = 0; i < img.size(); ++i) img.data[i] = pixels[i];
  } else {
    for (int i = 0; i < img.size(); ++i) {
      const std::uint8_t* px = &pixels[static_cast<size_t>(i) * 3];
      img.data[i] = rgb_to_gray(px[0], px[1], px[2]);
    }
  }
  return img;
}

inline void save_png(const GrayImage& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoFailure("cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoFailure("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoFailure("png_create_info_struct failed");
  }

  std::vector<std::uint8_t> row(static_cast<size_t>(img.width));

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoFailure(path + ": PNG encode error");
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) row[c] = quantize(img.at(r, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- JPEG ----

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

inline GrayImage load_jpeg(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoFailure("cannot open " + path);

  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;

  GrayImage img;
  std::vector<std::uint8_t> row;

  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoFailure(path + ": JPEG decode error");
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_GRAYSCALE;  // libjpeg converts with BT.601 luma
  jpeg_start_decompress(&cinfo);

  img = GrayImage(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  row.resize(cinfo.output_width);
  JSAMPROW rowp = row.data();
  while (cinfo.output_scanline < cinfo.output_height) {
    const int r = static_cast<int>(cinfo.output_scanline);
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    for (int c = 0; c < img.width; ++c) img.at(r, c) = row[c];
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

inline void save_jpeg(const GrayImage& img, const std::string& path, int quality = 95) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoFailure("cannot open " + path + " for writing");

  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;

  std::vector<std::uint8_t> row(static_cast<size_t>(img.width));

  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IoFailure(path + ": JPEG encode error");
  }

  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 1;
  cinfo.in_color_space = JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  JSAMPROW rowp = row.data();
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) row[c] = quantize(img.at(r, c));
    jpeg_write_scanlines(&cinfo, &rowp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

}  // namespace detail

/// Loads PGM, PNG, or JPEG by sniffing magic bytes; color input is reduced to
/// gray with the fixed luma weights (0.299, 0.587, 0.114).
inline GrayImage load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoFailure("cannot open " + path);
  unsigned char magic[4] = {0, 0, 0, 0};
  probe.read(reinterpret_cast<char*>(magic), 4);
  probe.close();
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '2')) return detail::load_pgm(path);
  if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G')
    return detail::load_png(path);
  if (magic[0] == 0xFF && magic[1] == 0xD8) return detail::load_jpeg(path);
  throw UnsupportedFormat(path + ": unrecognized image format");
}

/// Saves by extension: .pgm, .png, or .jpg/.jpeg. Values are clamped to
/// [0, 255] and rounded.
inline void save_image(const GrayImage& img, const std::string& path) {
  if (img.empty()) throw EmptyImage("save_image: empty image");
  const std::string ext = detail::lower_ext(path);
  if (ext == "pgm")
    detail::save_pgm(img, path);
  else if (ext == "png")
    detail::save_png(img, path);
  else if (ext == "jpg" || ext == "jpeg")
    detail::save_jpeg(img, path);
  else
    throw UnsupportedFormat(path + ": unsupported output extension ." + ext);
}

/// Masks are persisted as 0/255 gray rasters.
inline void save_mask(const BinaryMask& mask, const std::string& path) {
  if (mask.empty()) throw EmptyImage("save_mask: empty mask");
  GrayImage img(mask.width, mask.height);
  for (int i = 0; i < mask.size(); ++i) img.data[i] = mask.data[i] ? 255.0 : 0.0;
  save_image(img, path);
}

inline BinaryMask load_mask(const std::string& path) {
  const GrayImage img = load_image(path);
  BinaryMask mask(img.width, img.height);
  for (int i = 0; i < img.size(); ++i) mask.data[i] = img.data[i] > 127.0 ? 1 : 0;
  return mask;
}

/// Min-max rescale to [0, 255] for debug dumps of signed rasters; constant
/// rasters map to 0.
inline GrayImage rescale_for_display(const GrayImage& img) {
  const auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
  GrayImage out(img.width, img.height);
  if (*mx_it == *mn_it) return out;
  const double scale = 255.0 / (*mx_it - *mn_it);
  for (int i = 0; i < img.size(); ++i) out.data[i] = scale * (img.data[i] - *mn_it);
  return out;
}

}  // namespace rootseg
