#include "tmap/graph.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

namespace tmap {

using nlohmann::ordered_json;

Grid<std::int32_t> label_regions(const LayerGrid& grid, std::size_t* region_count) {
  const Eigen::Index h = grid.rows(), w = grid.cols();
  Grid<std::int32_t> label = Grid<std::int32_t>::Constant(h, w, -1);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  std::int32_t next = 0;
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const ClassId id = grid(y, x);
      if (is_sentinel(id) || label(y, x) >= 0) continue;
      label(y, x) = next;
      stack.assign(1, {y, x});
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        auto visit = [&](Eigen::Index ny, Eigen::Index nx) {
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) return;
          if (grid(ny, nx) != id || label(ny, nx) >= 0) return;
          label(ny, nx) = next;
          stack.emplace_back(ny, nx);
        };
        visit(cy - 1, cx);
        visit(cy + 1, cx);
        visit(cy, cx - 1);
        visit(cy, cx + 1);
      }
      ++next;
    }
  if (region_count) *region_count = static_cast<std::size_t>(next);
  return label;
}

namespace {

std::vector<Region> regions_from_labels(const LayerGrid& grid, const Grid<std::int32_t>& label, std::size_t n,
                                        LayerKind layer) {
  std::vector<Region> out(n);
  std::vector<double> sx(n, 0.0), sy(n, 0.0);
  for (Eigen::Index y = 0; y < grid.rows(); ++y)
    for (Eigen::Index x = 0; x < grid.cols(); ++x) {
      const std::int32_t l = label(y, x);
      if (l < 0) continue;
      Region& r = out[static_cast<std::size_t>(l)];
      const int ix = static_cast<int>(x), iy = static_cast<int>(y);
      if (r.pixel_count == 0) {
        r.layer = layer;
        r.class_id = grid(y, x);
        r.bbox = {ix, iy, ix, iy};
      }
      ++r.pixel_count;
      sx[static_cast<std::size_t>(l)] += static_cast<double>(x);
      sy[static_cast<std::size_t>(l)] += static_cast<double>(y);
      r.bbox.x0 = std::min(r.bbox.x0, ix);
      r.bbox.y0 = std::min(r.bbox.y0, iy);
      r.bbox.x1 = std::max(r.bbox.x1, ix);
      r.bbox.y1 = std::max(r.bbox.y1, iy);
    }
  for (std::size_t i = 0; i < n; ++i) {
    const double c = static_cast<double>(out[i].pixel_count);
    out[i].centroid = {sx[i] / c, sy[i] / c};
  }
  return out;
}

std::string number_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<Region> extract_regions(const LayerGrid& grid, LayerKind layer) {
  std::size_t n = 0;
  const auto label = label_regions(grid, &n);
  return regions_from_labels(grid, label, n, layer);
}

RegionGraph build_graph(const TissueMap& map, const GraphOptions& options) {
  if (options.k_nearest && *options.k_nearest < 1) throw GraphError("k_nearest must be at least 1");
  RegionGraph g;
  std::array<Grid<std::int32_t>, 3> labels;
  std::array<std::size_t, 3> offset{};
  for (LayerKind l : kAllLayers) {
    const auto li = layer_index(l);
    std::size_t n = 0;
    labels[li] = label_regions(map.layer(l), &n);
    offset[li] = g.nodes.size();
    auto regions = regions_from_labels(map.layer(l), labels[li], n, l);
    const std::size_t first = g.nodes.size();
    g.nodes.insert(g.nodes.end(), regions.begin(), regions.end());

    std::vector<std::vector<bool>> keep;
    if (options.k_nearest) {
      const std::size_t k = static_cast<std::size_t>(*options.k_nearest);
      keep.assign(n, std::vector<bool>(n, false));
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) {
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
        const std::size_t take = std::min(k, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                          [&](std::size_t a, std::size_t b) {
                            const double da = (regions[a].centroid - regions[i].centroid).norm();
                            const double db = (regions[b].centroid - regions[i].centroid).norm();
                            return da != db ? da < db : a < b;
                          });
        for (std::size_t t = 0; t < take; ++t) keep[i][order[t]] = keep[order[t]][i] = true;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!options.k_nearest || keep[i][j])
          g.intra_edges.push_back({first + i, first + j, (regions[i].centroid - regions[j].centroid).norm()});
  }

  std::map<std::pair<std::size_t, std::size_t>, std::int64_t> overlap;
  const Eigen::Index h = map.height(), w = map.width();
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      for (std::size_t a = 0; a < 3; ++a) {
        const std::int32_t la = labels[a](y, x);
        if (la < 0) continue;
        for (std::size_t b = a + 1; b < 3; ++b) {
          const std::int32_t lb = labels[b](y, x);
          if (lb < 0) continue;
          ++overlap[{offset[a] + static_cast<std::size_t>(la), offset[b] + static_cast<std::size_t>(lb)}];
        }
      }
  for (const auto& [key, n] : overlap) g.cross_edges.push_back({key.first, key.second, n});
  return g;
}

std::string export_graph(const RegionGraph& g, const ProfileRefs& profiles) {
  ordered_json nodes = ordered_json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Region& r = g.nodes[i];
    const ProfileEntry* e = profiles[layer_index(r.layer)]->find(r.class_id);
    if (!e)
      throw GraphError("class id " + std::to_string(r.class_id) + " missing from " +
                       std::string(layer_name(r.layer)) + " profile");
    nodes.push_back({{"id", i},
                     {"layer", layer_name(r.layer)},
                     {"class_code", e->code},
                     {"class_id", r.class_id},
                     {"pixel_count", r.pixel_count},
                     {"centroid", {r.centroid.x(), r.centroid.y()}},
                     {"bbox", {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1}}});
  }
  ordered_json edges = ordered_json::array();
  for (const auto& e : g.intra_edges)
    edges.push_back({{"a", e.a}, {"b", e.b}, {"kind", "intra"}, {"weight", e.distance}});
  for (const auto& e : g.cross_edges)
    edges.push_back({{"a", e.a}, {"b", e.b}, {"kind", "cross"}, {"weight", e.overlap}});
  ordered_json doc;
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc.dump(1) + "\n";
}

RegionGraph import_graph(const std::string& text, const ProfileRefs& profiles) {
  RegionGraph g;
  try {
    const ordered_json doc = ordered_json::parse(text);
    for (const auto& n : doc.at("nodes")) {
      if (n.at("id").get<std::size_t>() != g.nodes.size()) throw GraphError("node ids must be 0..n-1 in order");
      Region r;
      r.layer = parse_layer_name(n.at("layer").get<std::string>());
      r.class_id = lookup(*profiles[layer_index(r.layer)], n.at("class_code").get<std::string>());
      if (n.contains("class_id") && n["class_id"].get<int>() != r.class_id)
        throw GraphError("node " + std::to_string(g.nodes.size()) + ": class_code and class_id disagree");
      r.pixel_count = n.at("pixel_count").get<std::int64_t>();
      r.centroid = {n.at("centroid").at(0).get<double>(), n.at("centroid").at(1).get<double>()};
      const auto& b = n.at("bbox");
      r.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
      g.nodes.push_back(r);
    }
    for (const auto& e : doc.at("edges")) {
      const auto a = e.at("a").get<std::size_t>(), b = e.at("b").get<std::size_t>();
      if (a >= g.nodes.size() || b >= g.nodes.size()) throw GraphError("edge endpoint out of range");
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "intra")
        g.intra_edges.push_back({a, b, e.at("weight").get<double>()});
      else if (kind == "cross")
        g.cross_edges.push_back({a, b, e.at("weight").get<std::int64_t>()});
      else
        throw GraphError("unknown edge kind '" + kind + "'");
    }
  } catch (const ordered_json::exception& e) {
    throw GraphError(std::string("malformed graph document: ") + e.what());
  }
  return g;
}

std::string export_edge_list(const RegionGraph& g) {
  std::string out;
  for (const auto& e : g.intra_edges)
    out += std::to_string(e.a) + " " + std::to_string(e.b) + " intra " + number_text(e.distance) + "\n";
  for (const auto& e : g.cross_edges)
    out += std::to_string(e.a) + " " + std::to_string(e.b) + " cross " + std::to_string(e.overlap) + "\n";
  return out;
}

}  // namespace tmap
