#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "descry/errors.hpp"

namespace descry {

/// Grayscale raster. Intensities live in [0, 255] but are kept as doubles so
/// that averaging cascades never round until a file is written.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major

  GrayImage() = default;

  GrayImage(int w, int h, double fill = 0.0) : width(w), height(h) {
    if (w < 1 || h < 1) {
      throw config_error("image dimensions must be positive, got " + std::to_string(w) + "x" +
                         std::to_string(h));
    }
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }

  std::int64_t pixel_count() const {
    return static_cast<std::int64_t>(width) * static_cast<std::int64_t>(height);
  }

  double at(int x, int y) const {
    assert(x >= 0 && x < width && y >= 0 && y < height);
    return pixels[static_cast<std::size_t>(y) * width + x];
  }

  double& at(int x, int y) {
    assert(x >= 0 && x < width && y >= 0 && y < height);
    return pixels[static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const GrayImage&) const = default;
};

/// Round to the nearest byte, ties to even (the default FP rounding mode).
inline std::uint8_t quantize_intensity(double v) {
  assert(v >= 0.0 && v <= 255.0);
  return static_cast<std::uint8_t>(std::nearbyint(v));
}

namespace detail {

// Skips whitespace and '#' comment lines between PGM header tokens.
inline void skip_pgm_separators(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
}

inline long parse_pgm_int(const std::string& bytes, std::size_t& pos, const char* field) {
  skip_pgm_separators(bytes, pos);
  std::size_t start = pos;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (pos == start) {
    throw data_error(std::string("malformed PGM header: expected ") + field);
  }
  return std::stol(bytes.substr(start, pos - start));
}

}  // namespace detail

/// Loads a binary PGM (P5) file. Comments in the header are tolerated;
/// maxval must fit in 8 bits.
inline GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw io_error("cannot open image file: " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw data_error("malformed PGM header: missing magic in " + path.string());
  }
  if (bytes[1] != '5') {
    throw data_error(std::string("unsupported raster format 'P") + bytes[1] +
                     "' (only binary PGM P5): " + path.string());
  }

  std::size_t pos = 2;
  long w = detail::parse_pgm_int(bytes, pos, "width");
  long h = detail::parse_pgm_int(bytes, pos, "height");
  long maxval = detail::parse_pgm_int(bytes, pos, "maxval");
  if (w < 1 || h < 1 || w > (1 << 20) || h > (1 << 20)) {
    throw data_error("malformed PGM header: invalid dimensions " + std::to_string(w) + "x" +
                     std::to_string(h) + " in " + path.string());
  }
  if (maxval > 255) {
    throw data_error("unsupported PGM bit depth: maxval " + std::to_string(maxval) +
                     " exceeds 255 in " + path.string());
  }
  if (maxval < 1) {
    throw data_error("malformed PGM header: maxval " + std::to_string(maxval) + " in " +
                     path.string());
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw data_error("malformed PGM header: missing separator after maxval in " + path.string());
  }
  ++pos;  // exactly one whitespace byte before the raster

  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos < need) {
    throw data_error("truncated PGM pixel data: expected " + std::to_string(need) +
                     " bytes, found " + std::to_string(bytes.size() - pos) + " in " +
                     path.string());
  }

  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < need; ++i) {
    img.pixels[i] = static_cast<double>(static_cast<std::uint8_t>(bytes[pos + i]));
  }
  return img;
}

/// Writes the canonical P5 form: "P5\n<w> <h>\n255\n" followed by raw bytes.
/// Fractional intensities are rounded half-to-even.
inline void save_image(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw io_error("cannot open image file for writing: " + path.string());
  }
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::string raster(img.pixels.size(), '\0');
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    raster[i] = static_cast<char>(quantize_intensity(img.pixels[i]));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) {
    throw io_error("failed writing image file: " + path.string());
  }
}

}  // namespace descry
