#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tmap {

/// Dense row-major raster. Rows are y, columns are x.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ClassId = std::uint8_t;
using LayerGrid = Grid<ClassId>;

// Reserved NULL-value ids present at the head of every profile.
inline constexpr ClassId kNI = 0;   // background, no specimen
inline constexpr ClassId kUNC = 1;  // tissue present, not encoded / unclassified
inline constexpr ClassId kUNK = 2;  // uncertain
inline constexpr ClassId kNV = 3;   // no proper value
inline constexpr int kSentinelCount = 4;

constexpr bool is_sentinel(int id) { return id >= 0 && id < kSentinelCount; }

enum class LayerKind { Source = 0, TissueType = 1, Alteration = 2 };
inline constexpr std::array<LayerKind, 3> kAllLayers{LayerKind::Source, LayerKind::TissueType,
                                                    LayerKind::Alteration};

constexpr std::size_t layer_index(LayerKind k) { return static_cast<std::size_t>(k); }

/// "source" | "tissue" | "alteration"
std::string_view layer_name(LayerKind k);
LayerKind parse_layer_name(std::string_view name);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Parses "#RRGGBB" (case-insensitive). Throws std::invalid_argument.
Rgb parse_hex_color(std::string_view text);
bool is_hex_color(std::string_view text);
std::string to_hex_color(Rgb c);

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tmap
