#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tmap/profile.hpp"
#include "tmap/types.hpp"

namespace tmap {

struct PatchSpec {
  int patch_size = 512;
  int stride = 128;
};

struct PatchOrigin {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
  friend auto operator<=>(const PatchOrigin&, const PatchOrigin&) = default;
};

struct PatchPrediction {
  PatchOrigin origin;
  ClassId class_id = 0;
  double probability = 0.0;
};

/// Mean patch probability per map pixel for one class.
struct ProbabilityMap {
  ClassId class_id = 0;
  Grid<double> probability;
  Grid<std::int32_t> coverage;
};

class FusionError : public Error {
 public:
  using Error::Error;
};

void check_spec(const PatchSpec& spec);

/// Origins 0, s, 2s, ... while origin + patch <= dim.
std::vector<std::int64_t> tile_axis(std::int64_t dim, const PatchSpec& spec);
/// Row-major lattice of patch origins over a WSI.
std::vector<PatchOrigin> tile(std::int64_t wsi_width, std::int64_t wsi_height, const PatchSpec& spec = {});

/// Map-pixel box covered by a patch: floor of the scaled origin, ceil of the
/// scaled extent, clipped to the grid. Half-open [x0,x1) x [y0,y1).
struct PixelBox {
  Eigen::Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};
PixelBox footprint(PatchOrigin origin, int patch_size, double scale, Eigen::Index width, Eigen::Index height);

/// Most frequent non-sentinel class under the patch footprint, lowest id on
/// ties, NI when the footprint has no non-sentinel pixel.
ClassId label_patch(PatchOrigin origin, const LayerGrid& grid, double scale, const PatchSpec& spec = {});

/// One ProbabilityMap per distinct class id, ascending by id.
std::vector<ProbabilityMap> accumulate(const std::vector<PatchPrediction>& predictions, const PatchSpec& spec,
                                       int width, int height, double scale);

inline constexpr double kDefaultThreshold = 0.5;

/// Per pixel: no coverage -> NI; no class strictly above threshold -> UNC;
/// several -> UNK; exactly one -> that class.
LayerGrid fuse_multiclass(const std::vector<ProbabilityMap>& maps, double threshold = kDefaultThreshold);

/// Single merged class. Every covering patch above threshold -> class_id;
/// every covering patch at or below -> UNC; mixed -> UNK; uncovered -> NI.
LayerGrid fuse_binary(const std::vector<PatchPrediction>& predictions, ClassId class_id, const PatchSpec& spec,
                      int width, int height, double scale, double threshold = kDefaultThreshold);

struct SampleResult {
  std::vector<PatchOrigin> origins;  // sorted by (x, y)
  bool truncated = false;            // fewer qualifying origins than requested
};

/// Uniform sample without replacement from lattice origins whose strict label
/// equals `class_id`. Deterministic for a fixed seed.
SampleResult sample_patches(const LayerGrid& grid, std::int64_t wsi_width, std::int64_t wsi_height, double scale,
                            ClassId class_id, std::size_t count, std::uint64_t seed, const PatchSpec& spec = {});

/// Line-delimited JSON records: {"wsi_id","x","y","class","probability"}.
/// `class` is resolved against `profile`; records of other WSIs are skipped
/// when `wsi_id` is non-empty.
std::vector<PatchPrediction> parse_predictions(std::string_view jsonl, const Profile& profile,
                                               std::string_view wsi_id = {});

}  // namespace tmap
