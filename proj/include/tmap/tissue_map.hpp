#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmap/png_io.hpp"
#include "tmap/profile.hpp"
#include "tmap/types.hpp"

namespace tmap {

inline constexpr int kMaxMapSide = 4096;
inline constexpr int kSidecarVersion = 1;

/// Three aligned 8-bit class-id layers describing one whole-slide image.
struct TissueMap {
  std::string wsi_id;
  LayerGrid source;
  LayerGrid tissue;
  LayerGrid alteration;
  std::int64_t wsi_width = 0;   // level-0 pixels
  std::int64_t wsi_height = 0;
  double scale = 1.0;           // map px per level-0 px
  std::optional<double> microns_per_pixel;
  std::array<std::string, 3> profile_hashes;  // indexed by layer_index()

  Eigen::Index width() const { return source.cols(); }
  Eigen::Index height() const { return source.rows(); }

  LayerGrid& layer(LayerKind k);
  const LayerGrid& layer(LayerKind k) const;

  friend bool operator==(const TissueMap&, const TissueMap&) = default;
};

class MapError : public Error {
 public:
  using Error::Error;
};

/// All layers NI. Throws MapError for sides outside 1..4096 or when the
/// WSI dimensions disagree with the map aspect by more than a pixel.
TissueMap new_map(int width, int height, std::int64_t wsi_width, std::int64_t wsi_height,
                  std::string wsi_id);

/// Throws MapError describing the first broken invariant.
void check_map(const TissueMap& map);

struct EncodedMap {
  std::vector<std::uint8_t> image;  // PNG, R = alteration, G = source, B = tissue
  std::string sidecar;              // JSON
};

EncodedMap encode(const TissueMap& map);
TissueMap decode(const std::vector<std::uint8_t>& image, const std::string& sidecar);

/// Writes `<stem>.png` and `<stem>.json`.
void save_map(const TissueMap& map, const std::string& stem);
TissueMap load_map(const std::string& stem);

/// out = round_half_up(alpha * lut[id] + (1 - alpha) * base) per channel.
/// Without a base the result is the pure LUT rendering.
RgbImage render_layer(const TissueMap& map, LayerKind layer, const Profile& profile, double alpha,
                      const RgbImage* base = nullptr);

/// Indexed PNG of one layer; palette slot i = lut(profile)[i].
std::vector<std::uint8_t> export_palette_png(const TissueMap& map, LayerKind layer,
                                             const Profile& profile);

}  // namespace tmap
