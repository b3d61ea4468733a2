#include "tmap/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tmap {

namespace {

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw FusionError("prediction probability " + std::to_string(p) + " outside [0,1]");
}

void check_dims(int width, int height, double scale) {
  if (width < 1 || height < 1) throw FusionError("map dimensions must be positive");
  if (!(scale > 0)) throw FusionError("scale must be positive");
}

Eigen::Index clamp_to(double v, Eigen::Index hi) {
  return static_cast<Eigen::Index>(std::clamp(v, 0.0, static_cast<double>(hi)));
}

// Unbiased draw in [0, bound) independent of the standard library's
// distribution implementation, so samples reproduce across toolchains.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do r = rng();
  while (r >= limit);
  return r % bound;
}

}  // namespace

void check_spec(const PatchSpec& spec) {
  if (spec.patch_size < 1 || spec.stride < 1 || spec.stride > spec.patch_size)
    throw FusionError("patch spec requires 1 <= stride <= patch_size (got patch " + std::to_string(spec.patch_size) +
                      ", stride " + std::to_string(spec.stride) + ")");
}

std::vector<std::int64_t> tile_axis(std::int64_t dim, const PatchSpec& spec) {
  check_spec(spec);
  if (dim < spec.patch_size)
    throw FusionError("dimension " + std::to_string(dim) + " smaller than patch size " + std::to_string(spec.patch_size));
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>((dim - spec.patch_size) / spec.stride + 1));
  for (std::int64_t o = 0; o + spec.patch_size <= dim; o += spec.stride) out.push_back(o);
  return out;
}

std::vector<PatchOrigin> tile(std::int64_t wsi_width, std::int64_t wsi_height, const PatchSpec& spec) {
  const auto xs = tile_axis(wsi_width, spec);
  const auto ys = tile_axis(wsi_height, spec);
  std::vector<PatchOrigin> out;
  out.reserve(xs.size() * ys.size());
  for (auto y : ys)
    for (auto x : xs) out.push_back({x, y});
  return out;
}

PixelBox footprint(PatchOrigin o, int patch_size, double scale, Eigen::Index width, Eigen::Index height) {
  PixelBox b;
  b.x0 = clamp_to(std::floor(static_cast<double>(o.x) * scale), width);
  b.y0 = clamp_to(std::floor(static_cast<double>(o.y) * scale), height);
  b.x1 = clamp_to(std::ceil(static_cast<double>(o.x + patch_size) * scale), width);
  b.y1 = clamp_to(std::ceil(static_cast<double>(o.y + patch_size) * scale), height);
  return b;
}

ClassId label_patch(PatchOrigin origin, const LayerGrid& grid, double scale, const PatchSpec& spec) {
  check_spec(spec);
  const PixelBox box = footprint(origin, spec.patch_size, scale, grid.cols(), grid.rows());
  if (box.empty()) throw FusionError("patch footprint is empty after scaling");
  std::array<std::int64_t, 256> hist{};
  const auto block = grid.block(box.y0, box.x0, box.y1 - box.y0, box.x1 - box.x0);
  for (Eigen::Index y = 0; y < block.rows(); ++y)
    for (Eigen::Index x = 0; x < block.cols(); ++x) ++hist[block(y, x)];
  ClassId best = kNI;
  std::int64_t best_count = 0;
  for (int id = kSentinelCount; id < 256; ++id)
    if (hist[id] > best_count) {
      best = static_cast<ClassId>(id);
      best_count = hist[id];
    }
  return best;
}

std::vector<ProbabilityMap> accumulate(const std::vector<PatchPrediction>& predictions, const PatchSpec& spec,
                                       int width, int height, double scale) {
  check_spec(spec);
  check_dims(width, height, scale);
  for (const auto& p : predictions) check_probability(p.probability);

  // Canonical order makes the floating-point sums independent of input order.
  std::vector<PatchPrediction> sorted = predictions;
  std::sort(sorted.begin(), sorted.end(), [](const PatchPrediction& a, const PatchPrediction& b) {
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    if (a.origin != b.origin) return a.origin < b.origin;
    return a.probability < b.probability;
  });

  std::vector<ProbabilityMap> out;
  for (const auto& p : sorted) {
    if (out.empty() || out.back().class_id != p.class_id) {
      out.push_back({p.class_id, Grid<double>::Zero(height, width), Grid<std::int32_t>::Zero(height, width)});
    }
    auto& m = out.back();
    const PixelBox b = footprint(p.origin, spec.patch_size, scale, width, height);
    if (b.empty()) continue;
    const auto rows = b.y1 - b.y0, cols = b.x1 - b.x0;
    m.probability.block(b.y0, b.x0, rows, cols).array() += p.probability;
    m.coverage.block(b.y0, b.x0, rows, cols).array() += 1;
  }
  // Uncovered pixels hold a zero sum, so dividing by max(count, 1) leaves them at 0.
  for (auto& m : out) m.probability.array() /= m.coverage.cast<double>().array().max(1.0);
  return out;
}

LayerGrid fuse_multiclass(const std::vector<ProbabilityMap>& maps, double threshold) {
  if (maps.empty()) throw FusionError("fuse_multiclass needs at least one probability map");
  const auto rows = maps.front().probability.rows(), cols = maps.front().probability.cols();
  std::array<bool, 256> seen{};
  for (const auto& m : maps) {
    if (m.probability.rows() != rows || m.probability.cols() != cols || m.coverage.rows() != rows ||
        m.coverage.cols() != cols)
      throw FusionError("probability maps differ in dimensions");
    if (seen[m.class_id]) throw FusionError("duplicate class id " + std::to_string(m.class_id));
    seen[m.class_id] = true;
  }

  LayerGrid out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) {
      bool covered = false;
      int strong = 0;
      ClassId winner = kNI;
      for (const auto& m : maps) {
        if (m.coverage(y, x) <= 0) continue;
        covered = true;
        if (m.probability(y, x) > threshold) {
          ++strong;
          winner = m.class_id;
        }
      }
      out(y, x) = !covered ? kNI : strong == 0 ? kUNC : strong >= 2 ? kUNK : winner;
    }
  return out;
}

LayerGrid fuse_binary(const std::vector<PatchPrediction>& predictions, ClassId class_id, const PatchSpec& spec,
                      int width, int height, double scale, double threshold) {
  check_spec(spec);
  check_dims(width, height, scale);
  Grid<std::int32_t> above = Grid<std::int32_t>::Zero(height, width);
  Grid<std::int32_t> below = Grid<std::int32_t>::Zero(height, width);
  for (const auto& p : predictions) {
    check_probability(p.probability);
    if (p.class_id != class_id)
      throw FusionError("fuse_binary: prediction for class " + std::to_string(p.class_id) + " but fusing class " +
                        std::to_string(class_id));
    const PixelBox b = footprint(p.origin, spec.patch_size, scale, width, height);
    if (b.empty()) continue;
    auto& target = p.probability > threshold ? above : below;
    target.block(b.y0, b.x0, b.y1 - b.y0, b.x1 - b.x0).array() += 1;
  }
  LayerGrid out(height, width);
  for (Eigen::Index y = 0; y < height; ++y)
    for (Eigen::Index x = 0; x < width; ++x) {
      const bool a = above(y, x) > 0, b = below(y, x) > 0;
      out(y, x) = a && b ? kUNK : a ? class_id : b ? kUNC : kNI;
    }
  return out;
}

SampleResult sample_patches(const LayerGrid& grid, std::int64_t wsi_width, std::int64_t wsi_height, double scale,
                            ClassId class_id, std::size_t count, std::uint64_t seed, const PatchSpec& spec) {
  if (!(grid.array() == class_id).any())
    throw FusionError("class " + std::to_string(class_id) + " is absent from the layer");
  std::vector<PatchOrigin> qualifying;
  for (const auto& o : tile(wsi_width, wsi_height, spec)) {
    const PixelBox b = footprint(o, spec.patch_size, scale, grid.cols(), grid.rows());
    if (!b.empty() && label_patch(o, grid, scale, spec) == class_id) qualifying.push_back(o);
  }
  SampleResult res;
  if (count >= qualifying.size()) {
    res.truncated = count > qualifying.size();
    res.origins = std::move(qualifying);
  } else {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = i + static_cast<std::size_t>(draw_below(rng, qualifying.size() - i));
      std::swap(qualifying[i], qualifying[j]);
    }
    qualifying.resize(count);
    res.origins = std::move(qualifying);
  }
  std::sort(res.origins.begin(), res.origins.end());
  return res;
}

std::vector<PatchPrediction> parse_predictions(std::string_view jsonl, const Profile& profile, std::string_view wsi_id) {
  std::vector<PatchPrediction> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = nlohmann::json::parse(line);
      if (!wsi_id.empty() && rec.at("wsi_id").get<std::string>() != wsi_id) continue;
      PatchPrediction p;
      p.origin = {rec.at("x").get<std::int64_t>(), rec.at("y").get<std::int64_t>()};
      p.class_id = static_cast<ClassId>(lookup(profile, rec.at("class").get<std::string>()));
      p.probability = rec.at("probability").get<double>();
      check_probability(p.probability);
      out.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw FusionError("predictions line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw FusionError("predictions line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace tmap
