#include "tmap/types.hpp"

#include <cstdio>

namespace tmap {

namespace {

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string_view layer_name(LayerKind k) {
  switch (k) {
    case LayerKind::Source: return "source";
    case LayerKind::TissueType: return "tissue";
    case LayerKind::Alteration: return "alteration";
  }
  return "?";
}

LayerKind parse_layer_name(std::string_view name) {
  if (name == "source") return LayerKind::Source;
  if (name == "tissue") return LayerKind::TissueType;
  if (name == "alteration") return LayerKind::Alteration;
  throw Error("unknown layer '" + std::string(name) + "' (expected source|tissue|alteration)");
}

bool is_hex_color(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') return false;
  for (std::size_t i = 1; i < 7; ++i)
    if (hex_digit(text[i]) < 0) return false;
  return true;
}

Rgb parse_hex_color(std::string_view text) {
  if (!is_hex_color(text))
    throw std::invalid_argument("malformed hex color '" + std::string(text) + "'");
  auto byte = [&](std::size_t i) {
    return static_cast<std::uint8_t>(hex_digit(text[i]) * 16 + hex_digit(text[i + 1]));
  };
  return {byte(1), byte(3), byte(5)};
}

std::string to_hex_color(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", c.r, c.g, c.b);
  return buf;
}

}  // namespace tmap
