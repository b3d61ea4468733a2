#include "tmap/tissue_map.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace tmap {

using nlohmann::ordered_json;

namespace {

constexpr double kScaleSlack = 1.0 + 1e-9;

void check_side(std::int64_t v, const char* what) {
  if (v < 1 || v > kMaxMapSide)
    throw MapError(std::string("map ") + what + " " + std::to_string(v) + " outside 1.." +
                   std::to_string(kMaxMapSide));
}

}  // namespace

LayerGrid& TissueMap::layer(LayerKind k) {
  switch (k) {
    case LayerKind::Source: return source;
    case LayerKind::TissueType: return tissue;
    case LayerKind::Alteration: return alteration;
  }
  return source;
}

const LayerGrid& TissueMap::layer(LayerKind k) const {
  return const_cast<TissueMap&>(*this).layer(k);
}

TissueMap new_map(int width, int height, std::int64_t wsi_width, std::int64_t wsi_height,
                  std::string wsi_id) {
  check_side(width, "width");
  check_side(height, "height");
  if (wsi_width < 1 || wsi_height < 1) throw MapError("WSI dimensions must be positive");
  TissueMap m;
  m.wsi_id = std::move(wsi_id);
  m.source = LayerGrid::Constant(height, width, kNI);
  m.tissue = m.source;
  m.alteration = m.source;
  m.wsi_width = wsi_width;
  m.wsi_height = wsi_height;
  m.scale = wsi_width >= wsi_height ? static_cast<double>(width) / static_cast<double>(wsi_width)
                                    : static_cast<double>(height) / static_cast<double>(wsi_height);
  check_map(m);
  return m;
}

void check_map(const TissueMap& m) {
  check_side(m.source.cols(), "width");
  check_side(m.source.rows(), "height");
  for (LayerKind k : kAllLayers) {
    const auto& g = m.layer(k);
    if (g.rows() != m.source.rows() || g.cols() != m.source.cols())
      throw MapError("layer '" + std::string(layer_name(k)) + "' has dimensions " +
                     std::to_string(g.cols()) + "x" + std::to_string(g.rows()) +
                     " but source layer is " + std::to_string(m.source.cols()) + "x" +
                     std::to_string(m.source.rows()));
  }
  if (m.wsi_width < 1 || m.wsi_height < 1) throw MapError("WSI dimensions must be positive");
  if (!(m.scale > 0) || !std::isfinite(m.scale)) throw MapError("scale must be positive");
  const double dw = std::abs(m.scale * static_cast<double>(m.wsi_width) - static_cast<double>(m.width()));
  const double dh = std::abs(m.scale * static_cast<double>(m.wsi_height) - static_cast<double>(m.height()));
  if (dw > kScaleSlack || dh > kScaleSlack)
    throw MapError("scale " + std::to_string(m.scale) + " inconsistent with map " +
                   std::to_string(m.width()) + "x" + std::to_string(m.height()) + " and WSI " +
                   std::to_string(m.wsi_width) + "x" + std::to_string(m.wsi_height));
}

EncodedMap encode(const TissueMap& map) {
  check_map(map);
  for (LayerKind k : kAllLayers)
    if (map.profile_hashes[layer_index(k)].empty())
      throw MapError("map '" + map.wsi_id + "' has no profile hash for layer " + std::string(layer_name(k)));

  RgbImage img;
  img.r = map.alteration;
  img.g = map.source;
  img.b = map.tissue;

  ordered_json side;
  side["format_version"] = kSidecarVersion;
  side["wsi_id"] = map.wsi_id;
  side["width"] = map.width();
  side["height"] = map.height();
  side["wsi_width"] = map.wsi_width;
  side["wsi_height"] = map.wsi_height;
  side["scale"] = map.scale;
  side["microns_per_pixel"] =
      map.microns_per_pixel ? ordered_json(*map.microns_per_pixel) : ordered_json(nullptr);
  side["channels"] = {{"R", "alteration"}, {"G", "source"}, {"B", "tissue"}};
  side["profile_hashes"] = {{"source", map.profile_hashes[0]},
                            {"tissue", map.profile_hashes[1]},
                            {"alteration", map.profile_hashes[2]}};
  return {encode_png_rgb(img), side.dump(2) + "\n"};
}

TissueMap decode(const std::vector<std::uint8_t>& image, const std::string& sidecar) {
  ordered_json side;
  try {
    side = ordered_json::parse(sidecar);
  } catch (const ordered_json::exception& e) {
    throw MapError(std::string("malformed sidecar: ") + e.what());
  }
  try {
    const int version = side.at("format_version").get<int>();
    if (version != kSidecarVersion)
      throw MapError("unsupported sidecar format_version " + std::to_string(version));
    if (!png_is_rgb8(image)) throw MapError("tissue-map image is not 8-bit RGB");

    RgbImage img = decode_png_rgb(image);
    const auto width = side.at("width").get<std::int64_t>();
    const auto height = side.at("height").get<std::int64_t>();
    if (img.width() != width || img.height() != height)
      throw MapError("image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                     " but sidecar declares " + std::to_string(width) + "x" + std::to_string(height));

    TissueMap m;
    m.wsi_id = side.at("wsi_id").get<std::string>();
    m.alteration = img.r;
    m.source = img.g;
    m.tissue = img.b;
    m.wsi_width = side.at("wsi_width").get<std::int64_t>();
    m.wsi_height = side.at("wsi_height").get<std::int64_t>();
    m.scale = side.at("scale").get<double>();
    if (side.contains("microns_per_pixel") && !side["microns_per_pixel"].is_null())
      m.microns_per_pixel = side["microns_per_pixel"].get<double>();
    if (!side.contains("profile_hashes")) throw MapError("sidecar has no profile_hashes");
    for (LayerKind k : kAllLayers) {
      const auto& hashes = side["profile_hashes"];
      const std::string key(layer_name(k));
      if (!hashes.contains(key) || !hashes[key].is_string() || hashes[key].get<std::string>().empty())
        throw MapError("sidecar has no profile hash for layer " + key);
      m.profile_hashes[layer_index(k)] = hashes[key].get<std::string>();
    }
    check_map(m);
    return m;
  } catch (const ordered_json::exception& e) {
    throw MapError(std::string("malformed sidecar: ") + e.what());
  }
}

void save_map(const TissueMap& map, const std::string& stem) {
  auto enc = encode(map);
  write_file_bytes(stem + ".png", enc.image);
  write_file_text(stem + ".json", enc.sidecar);
}

TissueMap load_map(const std::string& stem) {
  return decode(read_file_bytes(stem + ".png"), read_file_text(stem + ".json"));
}

RgbImage render_layer(const TissueMap& map, LayerKind layer, const Profile& profile, double alpha,
                      const RgbImage* base) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw MapError("alpha must lie in [0,1]");
  if (profile.content_hash() != map.profile_hashes[layer_index(layer)])
    throw MapError("profile hash does not match the map's " + std::string(layer_name(layer)) + " layer");
  const auto& grid = map.layer(layer);
  if (base && (base->width() != grid.cols() || base->height() != grid.rows()))
    throw MapError("base image is " + std::to_string(base->width()) + "x" + std::to_string(base->height()) +
                   " but map is " + std::to_string(grid.cols()) + "x" + std::to_string(grid.rows()));

  const auto table = lut(profile);
  RgbImage out(grid.cols(), grid.rows());
  for (Eigen::Index y = 0; y < grid.rows(); ++y)
    for (Eigen::Index x = 0; x < grid.cols(); ++x) out.set(x, y, table[grid(y, x)]);
  if (!base) return out;

  auto blend = [alpha](const Grid<std::uint8_t>& fg, const Grid<std::uint8_t>& bg) -> Grid<std::uint8_t> {
    return (alpha * fg.cast<double>().array() + (1.0 - alpha) * bg.cast<double>().array() + 0.5)
        .floor()
        .min(255.0)
        .cast<std::uint8_t>()
        .matrix();
  };
  out.r = blend(out.r, base->r);
  out.g = blend(out.g, base->g);
  out.b = blend(out.b, base->b);
  return out;
}

std::vector<std::uint8_t> export_palette_png(const TissueMap& map, LayerKind layer,
                                             const Profile& profile) {
  if (profile.content_hash() != map.profile_hashes[layer_index(layer)])
    throw MapError("profile hash does not match the map's " + std::string(layer_name(layer)) + " layer");
  return encode_png_indexed(map.layer(layer), lut(profile));
}

}  // namespace tmap
