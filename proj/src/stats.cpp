#include "tmap/stats.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace tmap {

using nlohmann::ordered_json;

std::string_view mode_name(NormalizationMode m) {
  switch (m) {
    case NormalizationMode::PerImage: return "per_image";
    case NormalizationMode::PerSpecimen: return "per_specimen";
    case NormalizationMode::PerContent: return "per_content";
  }
  return "?";
}

NormalizationMode parse_mode_name(std::string_view name) {
  for (auto m : kAllModes)
    if (mode_name(m) == name) return m;
  throw StatsError("unknown normalization mode '" + std::string(name) +
                   "' (expected per_image|per_specimen|per_content)");
}

Grid<bool> specimen_mask(const TissueMap& map, LayerKind layer) {
  Grid<bool> mask = (map.source.array() != kNI).matrix();
  if (!mask.any()) mask = (map.layer(layer).array() != kNI).matrix();
  return mask;
}

CompositionVector composition(const TissueMap& map, LayerKind layer, NormalizationMode mode) {
  const LayerGrid& grid = map.layer(layer);
  const Grid<bool> mask = specimen_mask(map, layer);

  std::array<std::int64_t, 256> all{}, in_mask{};
  for (Eigen::Index y = 0; y < grid.rows(); ++y)
    for (Eigen::Index x = 0; x < grid.cols(); ++x) {
      const ClassId id = grid(y, x);
      ++all[id];
      if (mask(y, x)) ++in_mask[id];
    }

  CompositionVector v;
  v.layer = layer;
  v.mode = mode;
  v.profile_hash = map.profile_hashes[layer_index(layer)];
  v.total_pixels = grid.size();
  v.specimen_pixels = mask.count();
  for (int id = 0; id < 256; ++id)
    if (all[id] > 0) v.pixel_counts[id] = all[id];

  auto fill = [&](const std::array<std::int64_t, 256>& counts, int first_id) {
    std::int64_t denom = 0;
    for (int id = first_id; id < 256; ++id) denom += counts[id];
    if (denom == 0)
      throw EmptyDenominatorError("empty denominator for " + std::string(mode_name(mode)) + " composition of layer " +
                                  std::string(layer_name(layer)));
    for (int id = first_id; id < 256; ++id)
      if (counts[id] > 0) v.ratios[id] = static_cast<double>(counts[id]) / static_cast<double>(denom);
  };
  switch (mode) {
    case NormalizationMode::PerImage: fill(all, 0); break;
    case NormalizationMode::PerSpecimen: fill(in_mask, 1); break;
    case NormalizationMode::PerContent: fill(all, kSentinelCount); break;
  }
  return v;
}

CompositionSet all_compositions(const TissueMap& map) {
  CompositionSet out;
  for (LayerKind k : kAllLayers)
    for (NormalizationMode m : kAllModes) {
      auto& slot = out[layer_index(k)][static_cast<std::size_t>(m)];
      try {
        slot = composition(map, k, m);
      } catch (const EmptyDenominatorError&) {
        slot = CompositionVector{};
        slot.layer = k;
        slot.mode = m;
        slot.profile_hash = map.profile_hashes[layer_index(k)];
        slot.total_pixels = map.layer(k).size();
        slot.specimen_pixels = specimen_mask(map, k).count();
        const auto& g = map.layer(k);
        for (Eigen::Index i = 0; i < g.size(); ++i) ++slot.pixel_counts[g.data()[i]];
      }
    }
  return out;
}

CompositionVector rollup(const CompositionVector& v, const Profile& profile) {
  CompositionVector out = v;
  out.ratios.clear();
  out.pixel_counts.clear();
  auto chain = [&](int id) {
    if (!profile.contains(id))
      throw StatsError("class id " + std::to_string(id) + " missing from " + std::string(layer_name(profile.kind())) +
                       " profile");
    auto up = ancestors(profile, id);
    up.insert(up.begin(), id);
    return up;
  };
  for (const auto& [id, r] : v.ratios)
    for (int a : chain(id)) out.ratios[a] += r;
  for (const auto& [id, n] : v.pixel_counts)
    for (int a : chain(id)) out.pixel_counts[a] += n;
  return out;
}

namespace {

const std::string& code_of(const Profile& p, int id) {
  const ProfileEntry* e = p.find(id);
  if (!e) throw StatsError("class id " + std::to_string(id) + " missing from profile");
  return e->code;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ordered_json to_json(const CompositionVector& v, const Profile& profile) {
  ordered_json j;
  j["layer"] = layer_name(v.layer);
  j["mode"] = mode_name(v.mode);
  j["profile_hash"] = v.profile_hash;
  j["total_pixels"] = v.total_pixels;
  j["specimen_pixels"] = v.specimen_pixels;
  j["ratios"] = ordered_json::object();
  for (const auto& [id, r] : v.ratios) j["ratios"][code_of(profile, id)] = r;
  j["pixel_counts"] = ordered_json::object();
  for (const auto& [id, n] : v.pixel_counts) j["pixel_counts"][code_of(profile, id)] = n;
  return j;
}

CompositionVector composition_from_json(const ordered_json& j, const Profile& profile) {
  try {
    CompositionVector v;
    v.layer = parse_layer_name(j.at("layer").get<std::string>());
    v.mode = parse_mode_name(j.at("mode").get<std::string>());
    v.profile_hash = j.at("profile_hash").get<std::string>();
    v.total_pixels = j.at("total_pixels").get<std::int64_t>();
    v.specimen_pixels = j.at("specimen_pixels").get<std::int64_t>();
    for (const auto& [code, r] : j.at("ratios").items()) v.ratios[lookup(profile, code)] = r.get<double>();
    for (const auto& [code, n] : j.at("pixel_counts").items())
      v.pixel_counts[lookup(profile, code)] = n.get<std::int64_t>();
    return v;
  } catch (const ordered_json::exception& e) {
    throw StatsError(std::string("malformed composition document: ") + e.what());
  }
}

std::vector<BarSegment> bar_segments(const CompositionVector& v, const Profile& profile, int bar_width) {
  const auto table = lut(profile);
  std::vector<BarSegment> out;
  double cum = 0.0;
  int left = 0;
  for (const auto& [id, r] : v.ratios) {
    cum += r;
    const int right = static_cast<int>(std::lround(cum * bar_width));
    out.push_back({id, left, right - left, table[static_cast<std::size_t>(id)]});
    left = right;
  }
  return out;
}

std::string to_barchart(const std::array<CompositionVector, 3>& vectors, const std::array<const Profile*, 3>& profiles,
                        std::string_view title) {
  constexpr int kLabelWidth = 110, kBarHeight = 28, kRowGap = 18, kTop = 34, kLegendRow = 16;
  struct LegendItem {
    std::string_view layer;
    std::string color, text;
  };
  std::vector<LegendItem> legend;
  std::ostringstream body;
  int y = kTop;
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& v = vectors[l];
    const Profile& p = *profiles[l];
    body << "  <text x=\"4\" y=\"" << y + kBarHeight / 2 + 4 << "\" font-size=\"13\">" << layer_name(v.layer)
         << "</text>\n";
    body << "  <rect x=\"" << kLabelWidth << "\" y=\"" << y << "\" width=\"" << kBarWidth << "\" height=\""
         << kBarHeight << "\" fill=\"none\" stroke=\"#444444\"/>\n";
    if (v.ratios.empty())
      body << "  <text x=\"" << kLabelWidth + 6 << "\" y=\"" << y + kBarHeight / 2 + 4
           << "\" font-size=\"11\">no data</text>\n";
    for (const auto& seg : bar_segments(v, p, kBarWidth)) {
      const ProfileEntry* e = p.find(seg.class_id);
      const std::string name = e ? e->name : std::to_string(seg.class_id);
      if (seg.width > 0)
        body << "  <rect class=\"segment\" data-layer=\"" << layer_name(v.layer) << "\" data-class=\""
             << xml_escape(name) << "\" x=\"" << kLabelWidth + seg.x << "\" y=\"" << y << "\" width=\"" << seg.width
             << "\" height=\"" << kBarHeight << "\" fill=\"" << to_hex_color(seg.color) << "\"/>\n";
      legend.push_back({layer_name(v.layer), to_hex_color(seg.color),
                        xml_escape(name) + " " + fmt("%.2f", v.ratio(seg.class_id) * 100.0) + " %"});
    }
    y += kBarHeight + kRowGap;
  }
  const int legend_top = y;
  const int height = legend_top + static_cast<int>(legend.size()) * kLegendRow + 10;
  const int width = kLabelWidth + kBarWidth + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\">\n";
  svg << "  <text x=\"4\" y=\"20\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  svg << body.str();
  int ly = legend_top;
  for (const auto& item : legend) {
    svg << "  <rect x=\"" << kLabelWidth << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
        << item.color << "\"/>\n";
    svg << "  <text x=\"" << kLabelWidth + 16 << "\" y=\"" << ly + 9 << "\" font-size=\"11\">" << item.layer
        << ": " << item.text << "</text>\n";
    ly += kLegendRow;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tmap
