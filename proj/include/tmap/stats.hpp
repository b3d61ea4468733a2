#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tmap/profile.hpp"
#include "tmap/tissue_map.hpp"
#include "tmap/types.hpp"

namespace tmap {

enum class NormalizationMode { PerImage = 0, PerSpecimen = 1, PerContent = 2 };
inline constexpr std::array<NormalizationMode, 3> kAllModes{
    NormalizationMode::PerImage, NormalizationMode::PerSpecimen, NormalizationMode::PerContent};

/// "per_image" | "per_specimen" | "per_content"
std::string_view mode_name(NormalizationMode m);
NormalizationMode parse_mode_name(std::string_view name);

/// Class-area ratios of one layer.
///
/// pixel_counts always covers the whole layer. Ratios depend on the mode:
///  - PerImage: every id over all pixels.
///  - PerSpecimen: non-NI ids inside the specimen mask, over the non-NI
///    pixels inside the mask. The mask is the source layer's non-NI pixels,
///    or this layer's own non-NI pixels when the source layer is empty.
///  - PerContent: non-sentinel ids over this layer's non-sentinel pixels.
struct CompositionVector {
  LayerKind layer = LayerKind::Source;
  NormalizationMode mode = NormalizationMode::PerImage;
  std::map<int, double> ratios;
  std::map<int, std::int64_t> pixel_counts;
  std::int64_t specimen_pixels = 0;
  std::int64_t total_pixels = 0;
  std::string profile_hash;

  double ratio(int id) const {
    auto it = ratios.find(id);
    return it == ratios.end() ? 0.0 : it->second;
  }
  std::int64_t count(int id) const {
    auto it = pixel_counts.find(id);
    return it == pixel_counts.end() ? 0 : it->second;
  }
  friend bool operator==(const CompositionVector&, const CompositionVector&) = default;
};

class StatsError : public Error {
 public:
  using Error::Error;
};

/// Thrown when a mode's denominator is zero (e.g. PerContent on a layer with
/// only sentinel pixels).
class EmptyDenominatorError : public StatsError {
 public:
  using StatsError::StatsError;
};

/// Specimen mask: source layer non-NI, or `layer`'s own non-NI if the
/// source layer is entirely NI.
Grid<bool> specimen_mask(const TissueMap& map, LayerKind layer);

CompositionVector composition(const TissueMap& map, LayerKind layer, NormalizationMode mode);

/// All nine vectors, indexed [layer][mode]. Vectors whose denominator is zero
/// come back with empty ratios.
using CompositionSet = std::array<std::array<CompositionVector, 3>, 3>;
CompositionSet all_compositions(const TissueMap& map);

/// Adds every class's ratio and count to each of its ancestors.
CompositionVector rollup(const CompositionVector& v, const Profile& profile);

nlohmann::ordered_json to_json(const CompositionVector& v, const Profile& profile);
CompositionVector composition_from_json(const nlohmann::ordered_json& j, const Profile& profile);

struct BarSegment {
  int class_id = 0;
  int x = 0;
  int width = 0;
  Rgb color;
};

/// Segments in ascending id order; edges are the rounded cumulative ratios,
/// so widths sum to bar_width whenever the ratios sum to 1.
std::vector<BarSegment> bar_segments(const CompositionVector& v, const Profile& profile, int bar_width);

/// SVG with one stacked horizontal bar per layer plus a legend.
std::string to_barchart(const std::array<CompositionVector, 3>& vectors,
                        const std::array<const Profile*, 3>& profiles, std::string_view title = {});

inline constexpr int kBarWidth = 600;

}  // namespace tmap
