#include "tmap/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <sstream>

namespace tmap {

namespace {

struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> write_to_memory(png_image& img, const void* buffer, const void* colormap) {
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, buffer, 0, colormap))
    throw ImageError(std::string("png encode failed: ") + img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, buffer, 0, colormap))
    throw ImageError(std::string("png encode failed: ") + img.message);
  out.resize(size);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb(const RgbImage& src) {
  const auto w = src.width(), h = src.height();
  std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(w * h * 3));
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      auto* px = &interleaved[static_cast<std::size_t>((y * w + x) * 3)];
      px[0] = src.r(y, x);
      px[1] = src.g(y, x);
      px[2] = src.b(y, x);
    }
  PngImage p;
  p.img.width = static_cast<png_uint_32>(w);
  p.img.height = static_cast<png_uint_32>(h);
  p.img.format = PNG_FORMAT_RGB;
  return write_to_memory(p.img, interleaved.data(), nullptr);
}

RgbImage decode_png_rgb(const std::vector<std::uint8_t>& bytes) {
  PngImage p;
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size()))
    throw ImageError(std::string("png decode failed: ") + p.img.message);
  p.img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr))
    throw ImageError(std::string("png decode failed: ") + p.img.message);
  const Eigen::Index w = p.img.width, h = p.img.height;
  RgbImage out(w, h);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const auto* px = &buf[static_cast<std::size_t>((y * w + x) * 3)];
      out.set(x, y, {px[0], px[1], px[2]});
    }
  return out;
}

bool png_is_rgb8(const std::vector<std::uint8_t>& bytes) {
  // Signature (8) + IHDR length/type (8) + width/height (8) + depth + colour type.
  static const std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() < 26 || std::memcmp(bytes.data(), kSig, 8) != 0) return false;
  if (std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) return false;
  return bytes[24] == 8 && bytes[25] == 2;
}

std::vector<std::uint8_t> encode_png_indexed(const Grid<std::uint8_t>& indices,
                                             const std::array<Rgb, 256>& palette) {
  std::vector<std::uint8_t> cmap(256 * 3);
  for (std::size_t i = 0; i < 256; ++i) {
    cmap[i * 3] = palette[i].r;
    cmap[i * 3 + 1] = palette[i].g;
    cmap[i * 3 + 2] = palette[i].b;
  }
  PngImage p;
  p.img.width = static_cast<png_uint_32>(indices.cols());
  p.img.height = static_cast<png_uint_32>(indices.rows());
  p.img.format = PNG_FORMAT_RGB_COLORMAP;
  p.img.colormap_entries = 256;
  // Grid is row-major, so its storage is already the packed index buffer.
  return write_to_memory(p.img, indices.data(), cmap.data());
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

void write_file_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tmap
