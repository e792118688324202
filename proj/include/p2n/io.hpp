#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>
#include <tiffio.h>

#include "p2n/errors.hpp"
#include "p2n/image.hpp"

namespace p2n {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline bool has_tiff_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".tif" || ext == ".tiff";
}

// Interleaved samples -> planar unit-range raster.
inline Image from_interleaved(const std::vector<std::uint16_t>& samples, int h, int w, int c, double max) {
  Image img(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k)
        img.at(k, y, x) = samples[(static_cast<std::size_t>(y) * w + x) * c + k] / max;
  return img;
}

inline std::vector<std::uint16_t> to_interleaved(const Image& image, double max) {
  const int h = image.height(), w = image.width(), c = image.channels();
  std::vector<std::uint16_t> out(image.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        const double v = std::clamp(image.at(k, y, x), 0.0, 1.0);
        out[(static_cast<std::size_t>(y) * w + x) * c + k] = static_cast<std::uint16_t>(std::lround(v * max));
      }
  return out;
}

struct PngErrorState {
  std::jmp_buf jmp;
  char message[256] = {0};
};

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof state->message, "%s", msg);
  std::longjmp(state->jmp, 1);
}
inline void png_warning_handler(png_structp, png_const_charp) {}

inline Image load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError(path.string() + ": not a PNG file");

  PngErrorState err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }

  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int depth = 0, channels = 0;

  if (setjmp(err.jmp)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": " + err.message);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  int color = png_get_color_type(png, info);
  depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  if ((depth != 8 && depth != 16) || (channels != 1 && channels != 3)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": unsupported PNG layout");
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint16_t> samples(n);
  for (std::size_t i = 0; i < n; ++i)
    samples[i] = depth == 16 ? static_cast<std::uint16_t>((pixels[2 * i] << 8) | pixels[2 * i + 1]) : pixels[i];
  return from_interleaved(samples, static_cast<int>(height), static_cast<int>(width), channels,
                          depth == 16 ? 65535.0 : 255.0);
}

inline void save_png(const Image& image, const std::filesystem::path& path, int bit_depth) {
  const int h = image.height(), w = image.width(), c = image.channels();
  const auto samples = to_interleaved(image, bit_depth == 16 ? 65535.0 : 255.0);
  const std::size_t bytes = bit_depth / 8;
  const std::size_t stride = static_cast<std::size_t>(w) * c * bytes;
  std::vector<png_byte> pixels(stride * h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bytes == 2) {
      pixels[2 * i] = static_cast<png_byte>(samples[i] >> 8);
      pixels[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xFF);
    } else {
      pixels[i] = static_cast<png_byte>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = pixels.data() + y * stride;

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  PngErrorState err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(err.jmp)) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + err.message);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, bit_depth, c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct TiffCloser {
  void operator()(TIFF* t) const noexcept {
    if (t) TIFFClose(t);
  }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

inline void silence_libtiff() {
  static const bool once = [] {
    TIFFSetWarningHandler(nullptr);
    TIFFSetErrorHandler(nullptr);
    return true;
  }();
  (void)once;
}

inline Image load_tiff(const std::filesystem::path& path) {
  silence_libtiff();
  if (!std::filesystem::exists(path)) throw IoError("cannot open " + path.string());
  TiffPtr tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw FormatError(path.string() + ": not a readable TIFF file");
  std::uint32_t w = 0, h = 0;
  std::uint16_t bps = 0, spp = 1, config = PLANARCONFIG_CONTIG, format = SAMPLEFORMAT_UINT;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &config);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
  if ((bps != 8 && bps != 16) || (spp != 1 && spp != 3) || config != PLANARCONFIG_CONTIG ||
      format != SAMPLEFORMAT_UINT || w == 0 || h == 0)
    throw FormatError(path.string() + ": unsupported TIFF layout (need 8/16-bit uint, 1 or 3 channels)");
  const tmsize_t stride = TIFFScanlineSize(tif.get());
  std::vector<unsigned char> line(static_cast<std::size_t>(stride));
  std::vector<std::uint16_t> samples(static_cast<std::size_t>(w) * h * spp);
  for (std::uint32_t y = 0; y < h; ++y) {
    if (TIFFReadScanline(tif.get(), line.data(), y, 0) < 0) throw FormatError(path.string() + ": read error");
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * spp; ++i) {
      std::uint16_t v;
      if (bps == 16)
        std::memcpy(&v, line.data() + 2 * i, 2);  // libtiff returns host byte order
      else
        v = line[i];
      samples[y * static_cast<std::size_t>(w) * spp + i] = v;
    }
  }
  return from_interleaved(samples, static_cast<int>(h), static_cast<int>(w), spp, bps == 16 ? 65535.0 : 255.0);
}

inline void save_tiff(const Image& image, const std::filesystem::path& path, int bit_depth) {
  silence_libtiff();
  TiffPtr tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw IoError("cannot write " + path.string());
  const int h = image.height(), w = image.width(), c = image.channels();
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(w));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(h));
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(bit_depth));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(c));
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, c == 3 ? PHOTOMETRIC_RGB : PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(h));
  const auto samples = to_interleaved(image, bit_depth == 16 ? 65535.0 : 255.0);
  const std::size_t row_len = static_cast<std::size_t>(w) * c;
  std::vector<unsigned char> line(row_len * (bit_depth / 8));
  for (int y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < row_len; ++i) {
      const std::uint16_t v = samples[y * row_len + i];
      if (bit_depth == 16)
        std::memcpy(line.data() + 2 * i, &v, 2);
      else
        line[i] = static_cast<unsigned char>(v);
    }
    if (TIFFWriteScanline(tif.get(), line.data(), static_cast<std::uint32_t>(y), 0) < 0)
      throw IoError(path.string() + ": write error");
  }
}

}  // namespace detail

/// Reads an 8- or 16-bit PNG or TIFF and rescales to [0, 1] by the bit-depth
/// maximum. Alpha channels in PNG are dropped; palettes are expanded.
inline Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  return detail::has_tiff_extension(path) ? detail::load_tiff(path) : detail::load_png(path);
}

/// Clamps to [0, 1], quantises with round(v * max) and writes PNG (or TIFF
/// when the extension says so). This is the only clamp site in the pipeline.
inline void save_image(const Image& image, const std::filesystem::path& path, int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) throw ParameterError("bit depth must be 8 or 16");
  if (image.empty()) throw ParameterError("cannot save an empty image");
  image.validate();
  if (detail::has_tiff_extension(path))
    detail::save_tiff(image, path, bit_depth);
  else
    detail::save_png(image, path, bit_depth);
}

}  // namespace p2n
