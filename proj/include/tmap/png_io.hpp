#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tmap/types.hpp"

namespace tmap {

/// Planar 8-bit RGB image.
struct RgbImage {
  Grid<std::uint8_t> r, g, b;

  RgbImage() = default;
  RgbImage(Eigen::Index width, Eigen::Index height)
      : r(Grid<std::uint8_t>::Zero(height, width)),
        g(Grid<std::uint8_t>::Zero(height, width)),
        b(Grid<std::uint8_t>::Zero(height, width)) {}

  Eigen::Index width() const { return r.cols(); }
  Eigen::Index height() const { return r.rows(); }
  Rgb at(Eigen::Index x, Eigen::Index y) const { return {r(y, x), g(y, x), b(y, x)}; }
  void set(Eigen::Index x, Eigen::Index y, Rgb c) {
    r(y, x) = c.r;
    g(y, x) = c.g;
    b(y, x) = c.b;
  }
  friend bool operator==(const RgbImage& a, const RgbImage& b) {
    return a.r == b.r && a.g == b.g && a.b == b.b;
  }
};

class ImageError : public Error {
 public:
  using Error::Error;
};

std::vector<std::uint8_t> encode_png_rgb(const RgbImage& img);
/// Decodes any PNG the reader understands into 8-bit RGB.
RgbImage decode_png_rgb(const std::vector<std::uint8_t>& bytes);

/// True when the PNG header declares 8-bit truecolor without alpha.
bool png_is_rgb8(const std::vector<std::uint8_t>& bytes);

/// 8-bit indexed PNG with a full 256-entry palette; pixel value = index.
std::vector<std::uint8_t> encode_png_indexed(const Grid<std::uint8_t>& indices,
                                             const std::array<Rgb, 256>& palette);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_file_text(const std::string& path, const std::string& text);
std::string read_file_text(const std::string& path);

}  // namespace tmap
