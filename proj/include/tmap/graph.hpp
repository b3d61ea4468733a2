#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmap/profile.hpp"
#include "tmap/tissue_map.hpp"

namespace tmap {

/// Inclusive pixel box.
struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Maximal 4-connected component of one non-sentinel class.
struct Region {
  LayerKind layer = LayerKind::Source;
  int class_id = 0;
  std::int64_t pixel_count = 0;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();  // (x, y) in map pixels
  BoundingBox bbox;

  friend bool operator==(const Region& a, const Region& b) {
    return a.layer == b.layer && a.class_id == b.class_id && a.pixel_count == b.pixel_count &&
           a.centroid == b.centroid && a.bbox == b.bbox;
  }
};

struct IntraEdge {
  std::size_t a = 0, b = 0;  // node indices, a < b
  double distance = 0.0;
  friend bool operator==(const IntraEdge&, const IntraEdge&) = default;
};

struct CrossEdge {
  std::size_t a = 0, b = 0;  // a belongs to the earlier layer
  std::int64_t overlap = 0;
  friend bool operator==(const CrossEdge&, const CrossEdge&) = default;
};

struct RegionGraph {
  std::vector<Region> nodes;  // source regions, then tissue, then alteration
  std::vector<IntraEdge> intra_edges;
  std::vector<CrossEdge> cross_edges;
  friend bool operator==(const RegionGraph&, const RegionGraph&) = default;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

/// Regions in row-major order of their first pixel.
std::vector<Region> extract_regions(const LayerGrid& grid, LayerKind layer);

/// Same components, as a per-pixel region index (-1 for sentinels).
Grid<std::int32_t> label_regions(const LayerGrid& grid, std::size_t* region_count = nullptr);

struct GraphOptions {
  /// When set, an intra-layer edge is kept only if one endpoint is among the
  /// other's k nearest regions (ties by node index).
  std::optional<int> k_nearest;
};

RegionGraph build_graph(const TissueMap& map, const GraphOptions& options = {});

using ProfileRefs = std::array<const Profile*, 3>;

/// JSON document with "nodes" and "edges" tables.
std::string export_graph(const RegionGraph& g, const ProfileRefs& profiles);
RegionGraph import_graph(const std::string& text, const ProfileRefs& profiles);

/// One edge per line: "<a> <b> <intra|cross> <weight>".
std::string export_edge_list(const RegionGraph& g);

}  // namespace tmap
