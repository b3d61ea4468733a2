#include "tmap/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

namespace tmap {

using nlohmann::json;

namespace {

Ring parse_ring(const json& coords, std::size_t feature) {
  if (!coords.is_array()) throw AnnotationError("feature " + std::to_string(feature) + ": ring is not an array");
  Ring ring;
  ring.reserve(coords.size() + 1);
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw AnnotationError("feature " + std::to_string(feature) + ": malformed position");
    ring.emplace_back(pos[0].get<double>(), pos[1].get<double>());
  }
  if (!ring.empty() && ring.front() != ring.back()) ring.push_back(ring.front());
  std::set<std::pair<double, double>> distinct;
  for (const auto& p : ring) distinct.emplace(p.x(), p.y());
  if (distinct.size() < 3)
    throw AnnotationError("feature " + std::to_string(feature) + ": ring has fewer than 3 distinct vertices");
  return ring;
}

void parse_polygon(const json& rings, std::size_t feature, Annotation& ann) {
  if (!rings.is_array() || rings.empty())
    throw AnnotationError("feature " + std::to_string(feature) + ": polygon has no rings");
  ann.exterior = parse_ring(rings[0], feature);
  for (std::size_t i = 1; i < rings.size(); ++i) ann.holes.push_back(parse_ring(rings[i], feature));
}

int clamp_index(double v, int limit) {
  return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(limit)));
}

struct Edge {
  Point a, b;
};

}  // namespace

AnnotationSet parse_geojson(std::string_view text, LayerKind default_layer, std::string wsi_id) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw AnnotationError(std::string("malformed GeoJSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw AnnotationError("GeoJSON root must be a FeatureCollection");

  AnnotationSet set;
  set.wsi_id = std::move(wsi_id);
  set.source_tool = doc.contains("source_tool") && doc["source_tool"].is_string()
                        ? doc["source_tool"].get<std::string>()
                        : "QuPath";
  int order = 0;
  const auto& features = doc["features"];
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& feat = features[f];
    const std::string where = "feature " + std::to_string(f);
    if (!feat.is_object() || !feat.contains("geometry") || !feat["geometry"].is_object())
      throw AnnotationError(where + ": missing geometry");
    const auto& geom = feat["geometry"];
    const std::string type = geom.value("type", "");

    const json* props = feat.contains("properties") && feat["properties"].is_object() ? &feat["properties"] : nullptr;
    if (!props || !props->contains("classification") || !(*props)["classification"].is_object() ||
        !(*props)["classification"].contains("name") || !(*props)["classification"]["name"].is_string())
      throw AnnotationError(where + ": missing properties.classification.name");
    const std::string key = (*props)["classification"]["name"].get<std::string>();
    LayerKind layer = default_layer;
    if (props->contains("layer")) {
      if (!(*props)["layer"].is_string()) throw AnnotationError(where + ": properties.layer must be a string");
      try {
        layer = parse_layer_name((*props)["layer"].get<std::string>());
      } catch (const Error& e) {
        throw AnnotationError(where + ": " + e.what());
      }
    }

    if (!geom.contains("coordinates")) throw AnnotationError(where + ": geometry has no coordinates");
    std::vector<const json*> polygons;
    if (type == "Polygon") {
      polygons.push_back(&geom["coordinates"]);
    } else if (type == "MultiPolygon") {
      if (!geom["coordinates"].is_array()) throw AnnotationError(where + ": malformed MultiPolygon");
      for (const auto& poly : geom["coordinates"]) polygons.push_back(&poly);
    } else {
      throw AnnotationError(where + ": unsupported geometry type '" + type + "' (expected Polygon or MultiPolygon)");
    }
    for (const json* poly : polygons) {
      Annotation ann;
      ann.layer = layer;
      ann.class_key = key;
      ann.order_index = order++;
      parse_polygon(*poly, f, ann);
      set.annotations.push_back(std::move(ann));
    }
  }
  return set;
}

MapSize choose_resolution(std::int64_t wsi_width, std::int64_t wsi_height, int longest_side) {
  if (wsi_width < 1 || wsi_height < 1) throw Error("WSI dimensions must be positive");
  if (longest_side < kMinMapSide || longest_side > kMaxChosenMapSide)
    throw Error("map resolution " + std::to_string(longest_side) + " outside " + std::to_string(kMinMapSide) +
                ".." + std::to_string(kMaxChosenMapSide));
  auto other = [&](std::int64_t side, std::int64_t longest) {
    return static_cast<int>(std::max<std::int64_t>(1, side * longest_side / longest));
  };
  if (wsi_width >= wsi_height) return {longest_side, other(wsi_height, wsi_width)};
  return {other(wsi_width, wsi_height), longest_side};
}

LayerGrid rasterize(const AnnotationSet& set, const Profile& profile, int width, int height, double scale) {
  if (width < 1 || height < 1) throw Error("rasterize: map dimensions must be positive");
  if (!(scale > 0)) throw Error("rasterize: scale must be positive");

  struct Job {
    const Annotation* ann;
    ClassId id;
    std::size_t depth;
  };
  std::vector<Job> jobs;
  std::vector<std::string> unresolved;
  for (const auto& ann : set.annotations) {
    if (ann.layer != profile.kind()) continue;
    std::optional<int> id;
    try {
      id = try_lookup(profile, ann.class_key);
    } catch (const LookupError&) {
    }
    if (!id) {
      if (std::find(unresolved.begin(), unresolved.end(), ann.class_key) == unresolved.end())
        unresolved.push_back(ann.class_key);
      continue;
    }
    jobs.push_back({&ann, static_cast<ClassId>(*id), ancestors(profile, *id).size()});
  }
  if (!unresolved.empty()) {
    std::string msg = "unresolvable class keys for " + std::string(layer_name(profile.kind())) + " profile:";
    for (const auto& k : unresolved) msg += " '" + k + "'";
    throw AnnotationError(msg);
  }
  // Later paint wins: shallower first, then file order.
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.ann->order_index < b.ann->order_index;
  });

  LayerGrid grid = LayerGrid::Constant(height, width, kNI);
  std::vector<Edge> edges;
  std::vector<double> xs;
  for (const Job& job : jobs) {
    edges.clear();
    double ymin = INFINITY, ymax = -INFINITY;
    auto add_ring = [&](const Ring& ring) {
      for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        Edge e{ring[i] * scale, ring[i + 1] * scale};
        ymin = std::min({ymin, e.a.y(), e.b.y()});
        ymax = std::max({ymax, e.a.y(), e.b.y()});
        edges.push_back(e);
      }
    };
    add_ring(job.ann->exterior);
    for (const auto& h : job.ann->holes) add_ring(h);

    const int y0 = clamp_index(std::floor(ymin) - 1, height);
    const int y1 = clamp_index(std::ceil(ymax) + 1, height);
    for (int y = y0; y < y1; ++y) {
      const double py = y + 0.5;
      xs.clear();
      for (const auto& e : edges)
        if ((e.a.y() > py) != (e.b.y() > py))
          xs.push_back(e.a.x() + (py - e.a.y()) * (e.b.x() - e.a.x()) / (e.b.y() - e.a.y()));
      if (xs.empty()) continue;
      std::sort(xs.begin(), xs.end());
      // Inside iff an odd number of crossings lie strictly right of the centre.
      const double first = xs.front();
      int x = clamp_index(std::floor(first) - 1, width);
      std::size_t k = 0;  // crossings <= px
      for (; x < width; ++x) {
        const double px = x + 0.5;
        if (!(px < xs.back())) break;
        while (k < xs.size() && !(px < xs[k])) ++k;
        if ((xs.size() - k) % 2 == 1) grid(y, x) = job.id;
      }
    }
  }
  return grid;
}

TissueMap build_map(const std::vector<AnnotationSet>& sets, const std::array<const Profile*, 3>& profiles,
                    std::int64_t wsi_width, std::int64_t wsi_height, std::string wsi_id, int longest_side) {
  const MapSize size = choose_resolution(wsi_width, wsi_height, longest_side);
  TissueMap map = new_map(size.width, size.height, wsi_width, wsi_height, std::move(wsi_id));

  AnnotationSet merged;
  merged.wsi_id = map.wsi_id;
  int order = 0;
  for (const auto& s : sets)
    for (auto ann : s.annotations) {
      ann.order_index = order++;
      merged.annotations.push_back(std::move(ann));
    }
  for (LayerKind k : kAllLayers) {
    const Profile* p = profiles[layer_index(k)];
    if (!p || p->kind() != k) throw Error("build_map: missing " + std::string(layer_name(k)) + " profile");
    map.layer(k) = rasterize(merged, *p, size.width, size.height, map.scale);
    map.profile_hashes[layer_index(k)] = p->content_hash();
  }
  return map;
}

}  // namespace tmap
