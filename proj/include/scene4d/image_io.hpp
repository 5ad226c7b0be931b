// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "scene4d/error.hpp"
#include "scene4d/grid.hpp"

namespace scene4d {

namespace detail {

inline uint8_t to_u8(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace detail

/// 8-bit RGB PNG writer.
inline void write_png(const Image& image, const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const Color& c = image.at(x, y);
      row[3 * x + 0] = detail::to_u8(c.x());
      row[3 * x + 1] = detail::to_u8(c.y());
      row[3 * x + 2] = detail::to_u8(c.z());
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Image read_png(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);
  uint8_t sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw BadMagic("not a PNG file: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  // normalize everything to 8-bit RGB
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = png_get_image_width(png, info);
  const int h = png_get_image_height(png, info);
  Image image(w, h);
  std::vector<uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      image.at(x, y) = Color(row[3 * x] / 255.0, row[3 * x + 1] / 255.0, row[3 * x + 2] / 255.0);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

/// Grayscale PFM, scale header -1.0 (little-endian), rows stored bottom-up.
inline void write_pfm(const Raster& r, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "Pf\n" << r.width() << " " << r.height() << "\n-1.0\n";
  for (int y = r.height() - 1; y >= 0; --y) {
    std::vector<float> row(r.width());
    for (int x = 0; x < r.width(); ++x) row[x] = static_cast<float>(r.at(x, y));
    f.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
  if (!f) throw IoError("pfm write failed: " + path);
}

inline Raster read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "Pf") throw BadMagic("not a grayscale PFM file: " + path);
  int w = 0, h = 0;
  double scale = 0;
  f >> w >> h >> scale;
  f.get();  // single whitespace after the scale line
  if (!f || w <= 0 || h <= 0) throw TruncatedFile("bad PFM header: " + path);
  if (scale >= 0) throw IoError("big-endian PFM unsupported: " + path);
  Raster r(w, h);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!f) throw TruncatedFile("truncated PFM data: " + path);
    for (int x = 0; x < w; ++x) r.at(x, y) = row[x];
  }
  return r;
}

/// Binary 8-bit PGM; values scaled to [0, 1] on read, 255 = full.
inline void write_pgm(const Raster& r, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "P5\n" << r.width() << " " << r.height() << "\n255\n";
  std::vector<uint8_t> row(r.width());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) row[x] = detail::to_u8(r.at(x, y));
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) throw IoError("pgm write failed: " + path);
}

inline Raster read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw BadMagic("not a binary PGM file: " + path);
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  f.get();
  if (!f || w <= 0 || h <= 0 || maxval != 255) throw TruncatedFile("bad PGM header: " + path);
  Raster r(w, h);
  std::vector<uint8_t> row(w);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!f) throw TruncatedFile("truncated PGM data: " + path);
    for (int x = 0; x < w; ++x) r.at(x, y) = row[x] / 255.0;
  }
  return r;
}

}  // namespace scene4d
