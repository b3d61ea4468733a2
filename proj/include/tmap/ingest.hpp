#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tmap/profile.hpp"
#include "tmap/tissue_map.hpp"
#include "tmap/types.hpp"

namespace tmap {

using Point = Eigen::Vector2d;
/// Closed ring: front() == back().
using Ring = std::vector<Point>;

struct Annotation {
  LayerKind layer = LayerKind::TissueType;
  std::string class_key;
  Ring exterior;  // level-0 WSI pixel coordinates
  std::vector<Ring> holes;
  int order_index = 0;
};

struct AnnotationSet {
  std::string wsi_id;
  std::vector<Annotation> annotations;
  std::string source_tool;
};

class AnnotationError : public Error {
 public:
  using Error::Error;
};

/// FeatureCollection of Polygon / MultiPolygon features. The class key is read
/// from properties.classification.name; properties.layer overrides
/// `default_layer`.
AnnotationSet parse_geojson(std::string_view text, LayerKind default_layer, std::string wsi_id = {});

inline constexpr int kDefaultMapSide = 1024;
inline constexpr int kMinMapSide = 1000;
inline constexpr int kMaxChosenMapSide = 2000;

struct MapSize {
  int width = 0;
  int height = 0;
  friend bool operator==(const MapSize&, const MapSize&) = default;
};

/// Longest side becomes `longest_side` (1000..2000); the other side keeps the
/// aspect ratio, floored, at least 1.
MapSize choose_resolution(std::int64_t wsi_width, std::int64_t wsi_height,
                          int longest_side = kDefaultMapSide);

/// Even-odd pixel-centre fill of every annotation of the profile's layer.
/// Overlaps resolve to the deeper class, then to the later annotation.
LayerGrid rasterize(const AnnotationSet& set, const Profile& profile, int width, int height,
                    double scale);

/// Rasterizes all three layers into a new map and records the profile hashes.
TissueMap build_map(const std::vector<AnnotationSet>& sets, const std::array<const Profile*, 3>& profiles,
                    std::int64_t wsi_width, std::int64_t wsi_height, std::string wsi_id,
                    int longest_side = kDefaultMapSide);

}  // namespace tmap
