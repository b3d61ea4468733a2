// Command-line front end for building, indexing and querying tissue maps.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "tmap/catalog.hpp"
#include "tmap/fusion.hpp"
#include "tmap/graph.hpp"
#include "tmap/ingest.hpp"
#include "tmap/png_io.hpp"
#include "tmap/service.hpp"
#include "tmap/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace tmap;

namespace {

struct ProfilePaths {
  std::string source, tissue, alteration;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--source-profile", source, "Source (organ) profile CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--tissue-profile", tissue, "Tissue-type profile CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--alteration-profile", alteration, "Alteration profile CSV")
        ->required()
        ->check(CLI::ExistingFile);
  }

  ProfileSet load() const {
    return {load_profile(source, LayerKind::Source), load_profile(tissue, LayerKind::TissueType),
            load_profile(alteration, LayerKind::Alteration)};
  }
};

std::array<const Profile*, 3> refs(const ProfileSet& p) { return {&p[0], &p[1], &p[2]}; }

const CLI::Validator kLayerName = CLI::IsMember({"source", "tissue", "alteration"});
const CLI::Validator kModeName = CLI::IsMember({"per_image", "per_specimen", "per_content"});
const CLI::Validator kOpenUnit = CLI::Validator(
    [](const std::string& s) -> std::string {
      try {
        const double v = std::stod(s);
        return v > 0.0 && v < 1.0 ? "" : "must lie strictly between 0 and 1";
      } catch (const std::exception&) {
        return "not a number";
      }
    },
    "(0,1)");

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_file_text(path, text);
}

ordered_json compositions_doc(const std::string& wsi_id, const CompositionSet& set, const ProfileSet& profiles) {
  ordered_json j;
  j["wsi_id"] = wsi_id;
  ordered_json comps = ordered_json::object();
  for (LayerKind l : kAllLayers)
    for (NormalizationMode m : kAllModes)
      comps[std::string(layer_name(l))][std::string(mode_name(m))] =
          to_json(set[layer_index(l)][static_cast<std::size_t>(m)], profiles[layer_index(l)]);
  j["compositions"] = std::move(comps);
  return j;
}

CompositionSet compositions_from_doc(const ordered_json& j, const ProfileSet& profiles) {
  CompositionSet out;
  try {
    for (LayerKind l : kAllLayers)
      for (NormalizationMode m : kAllModes)
        out[layer_index(l)][static_cast<std::size_t>(m)] = composition_from_json(
            j.at("compositions").at(std::string(layer_name(l))).at(std::string(mode_name(m))),
            profiles[layer_index(l)]);
  } catch (const ordered_json::exception& e) {
    throw Error(std::string("malformed stats document: ") + e.what());
  }
  return out;
}

void check_layer_hash(const TissueMap& map, const ProfileSet& profiles) {
  for (LayerKind l : kAllLayers)
    if (map.profile_hashes[layer_index(l)] != profiles[layer_index(l)].content_hash())
      throw Error("map '" + map.wsi_id + "' layer " + std::string(layer_name(l)) +
                  " was built with a different profile");
}

Service* g_service = nullptr;
extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tissue-map metadata toolkit for whole-slide image archives", "tmap"};
  app.require_subcommand(1);
  bool machine = false;
  app.add_flag("--machine", machine, "Machine-readable JSON output");

  // validate-profile
  auto* validate = app.add_subcommand("validate-profile", "Check a profile CSV for structural problems");
  std::string validate_path, validate_layer;
  validate->add_option("profile", validate_path, "Profile CSV")->required()->check(CLI::ExistingFile);
  validate->add_option("--layer", validate_layer, "Layer the profile describes (default: from the file name)")
      ->check(kLayerName);

  // rasterize
  auto* rast = app.add_subcommand("rasterize", "Rasterize GeoJSON annotations into a tissue map");
  ProfilePaths rast_profiles;
  rast_profiles.add_to(rast);
  std::vector<std::string> rast_geojson;
  std::string rast_out, rast_id, rast_default_layer = "tissue";
  std::int64_t rast_wsi_w = 0, rast_wsi_h = 0;
  int rast_res = kDefaultMapSide;
  rast->add_option("--geojson", rast_geojson, "Annotation FeatureCollection(s)")
      ->required()
      ->check(CLI::ExistingFile);
  rast->add_option("--wsi-width", rast_wsi_w, "Level-0 WSI width")->required()->check(CLI::PositiveNumber);
  rast->add_option("--wsi-height", rast_wsi_h, "Level-0 WSI height")->required()->check(CLI::PositiveNumber);
  rast->add_option("--wsi-id", rast_id, "WSI identifier (default: output stem name)");
  rast->add_option("--resolution", rast_res, "Longest map side")->check(CLI::Range(kMinMapSide, kMaxChosenMapSide));
  rast->add_option("--default-layer", rast_default_layer, "Layer for features without properties.layer")
      ->check(kLayerName);
  rast->add_option("-o,--out", rast_out, "Output stem (writes <stem>.png and <stem>.json)")->required();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Fuse patch predictions into one layer of a tissue map");
  ProfilePaths fuse_profiles;
  fuse_profiles.add_to(fuse);
  std::string fuse_pred, fuse_out, fuse_id, fuse_layer = "tissue", fuse_base, fuse_binary;
  std::int64_t fuse_wsi_w = 0, fuse_wsi_h = 0;
  int fuse_res = kDefaultMapSide;
  double fuse_threshold = kDefaultThreshold;
  PatchSpec fuse_spec;
  fuse->add_option("--predictions", fuse_pred, "JSON-lines patch predictions")->required()->check(CLI::ExistingFile);
  fuse->add_option("--layer", fuse_layer, "Layer the predictions describe")->check(kLayerName);
  fuse->add_option("--base", fuse_base, "Existing map stem to receive the fused layer");
  fuse->add_option("--wsi-width", fuse_wsi_w, "Level-0 WSI width (new map)")->check(CLI::PositiveNumber);
  fuse->add_option("--wsi-height", fuse_wsi_h, "Level-0 WSI height (new map)")->check(CLI::PositiveNumber);
  fuse->add_option("--wsi-id", fuse_id, "WSI identifier (new map)");
  fuse->add_option("--resolution", fuse_res, "Longest map side (new map)")
      ->check(CLI::Range(kMinMapSide, kMaxChosenMapSide));
  fuse->add_option("--threshold", fuse_threshold, "Probability threshold")->check(kOpenUnit);
  fuse->add_option("--binary", fuse_binary, "Fuse a single merged class with the all-or-none rule");
  fuse->add_option("--patch-size", fuse_spec.patch_size, "Patch side in level-0 pixels");
  fuse->add_option("--stride", fuse_spec.stride, "Patch stride in level-0 pixels");
  fuse->add_option("-o,--out", fuse_out, "Output stem")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Compute layer compositions and a bar chart");
  ProfilePaths stats_profiles;
  stats_profiles.add_to(stats);
  std::string stats_map, stats_out, stats_chart, stats_mode = "per_specimen";
  stats->add_option("--map", stats_map, "Map stem")->required();
  stats->add_option("-o,--out", stats_out, "Compositions JSON (default: standard output)");
  stats->add_option("--barchart", stats_chart, "Write an SVG bar chart here");
  stats->add_option("--mode", stats_mode, "Normalization shown in the bar chart")->check(kModeName);

  // index
  auto* index = app.add_subcommand("index", "Add a map and its compositions to the catalog");
  ProfilePaths index_profiles;
  index_profiles.add_to(index);
  std::string index_map, index_stats, index_catalog, index_case, index_time;
  bool index_overwrite = false;
  index->add_option("--map", index_map, "Map stem")->required();
  index->add_option("--stats", index_stats, "Compositions JSON from 'stats' (default: recompute)")
      ->check(CLI::ExistingFile);
  index->add_option("--catalog", index_catalog, "Catalog file")->envname("TMAP_CATALOG")->required();
  index->add_option("--case-id", index_case, "Case identifier");
  index->add_option("--ingested-at", index_time, "Timestamp to record (default: now, UTC)");
  index->add_flag("--overwrite", index_overwrite, "Replace an existing record with the same wsi_id");

  // search
  auto* search = app.add_subcommand("search", "Query the catalog");
  ProfilePaths search_profiles;
  search_profiles.add_to(search);
  std::string search_query, search_catalog, search_mode = "per_specimen", search_manifest, search_out;
  search->add_option("-q,--query", search_query, "Composition query (empty matches everything)");
  search->add_option("--catalog", search_catalog, "Catalog file")->envname("TMAP_CATALOG")->required();
  search->add_option("--mode", search_mode, "Default normalization for comparisons")->check(kModeName);
  search->add_option("--manifest", search_manifest, "Emit a cohort manifest instead of ids")
      ->check(CLI::IsMember({"csv", "json"}));
  search->add_option("-o,--out", search_out, "Output file (default: standard output)");

  // graph
  auto* graph = app.add_subcommand("graph", "Build the region graph of a map");
  ProfilePaths graph_profiles;
  graph_profiles.add_to(graph);
  std::string graph_map, graph_out, graph_edges;
  std::optional<int> graph_k;
  graph->add_option("--map", graph_map, "Map stem")->required();
  graph->add_option("-o,--out", graph_out, "Adjacency JSON (default: standard output)");
  graph->add_option("--edge-list", graph_edges, "Also write a plain edge list here");
  graph->add_option("--k-nearest", graph_k, "Keep only k-nearest intra-layer edges")->check(CLI::PositiveNumber);

  // render
  auto* render = app.add_subcommand("render", "Render one layer as a colour image");
  ProfilePaths render_profiles;
  render_profiles.add_to(render);
  std::string render_map, render_out, render_layer_name = "alteration", render_base;
  double render_alpha = 1.0;
  bool render_palette = false;
  render->add_option("--map", render_map, "Map stem")->required();
  render->add_option("--layer", render_layer_name, "Layer to render")->check(kLayerName);
  render->add_option("--alpha", render_alpha, "Overlay opacity")->check(CLI::Range(0.0, 1.0));
  render->add_option("--base", render_base, "Thumbnail PNG to blend over")->check(CLI::ExistingFile);
  render->add_flag("--palette", render_palette, "Write an indexed PNG instead of a blend");
  render->add_option("-o,--out", render_out, "Output PNG")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  ProfilePaths serve_profiles;
  serve_profiles.add_to(serve);
  std::string serve_catalog, serve_host = "127.0.0.1";
  int serve_port = 8080;
  serve->add_option("--catalog", serve_catalog, "Catalog file")->envname("TMAP_CATALOG")->required();
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

  // sample
  auto* sample = app.add_subcommand("sample", "Draw training patches whose label is a given class");
  ProfilePaths sample_profiles;
  sample_profiles.add_to(sample);
  std::string sample_map, sample_layer = "tissue", sample_class;
  std::size_t sample_count = 0;
  std::uint64_t sample_seed = 0;
  PatchSpec sample_spec;
  sample->add_option("--map", sample_map, "Map stem")->required();
  sample->add_option("--layer", sample_layer, "Layer holding the class")->check(kLayerName);
  sample->add_option("--class", sample_class, "Class code or name")->required();
  sample->add_option("--count", sample_count, "Number of patches")->required();
  sample->add_option("--seed", sample_seed, "Random seed")->required();
  sample->add_option("--patch-size", sample_spec.patch_size, "Patch side in level-0 pixels");
  sample->add_option("--stride", sample_spec.stride, "Patch stride in level-0 pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (machine)
      std::cerr << ordered_json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    else
      std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }

  try {
    if (*validate) {
      LayerKind layer = LayerKind::Source;
      if (!validate_layer.empty())
        layer = parse_layer_name(validate_layer);
      else if (auto stem = fs::path(validate_path).stem().string();
               stem == "source" || stem == "tissue" || stem == "alteration")
        layer = parse_layer_name(stem);
      const Profile p = load_profile(validate_path, layer);
      const auto violations = validate_profile(p);
      if (machine) {
        ordered_json j;
        j["profile"] = validate_path;
        j["layer"] = layer_name(layer);
        j["entries"] = p.entries().size();
        j["content_hash"] = p.content_hash();
        j["violations"] = ordered_json::array();
        for (const auto& v : violations)
          j["violations"].push_back({{"kind", violation_name(v.kind)}, {"ids", v.ids}, {"message", v.message}});
        std::cout << j.dump(2) << "\n";
      } else {
        for (const auto& v : violations) std::cout << violation_name(v.kind) << ": " << v.message << "\n";
        std::cout << violations.size() << (violations.size() == 1 ? " violation" : " violations") << "\n";
      }
      return violations.empty() ? 0 : 1;
    }

    if (*rast) {
      const ProfileSet profiles = rast_profiles.load();
      const LayerKind default_layer = parse_layer_name(rast_default_layer);
      const std::string id = rast_id.empty() ? fs::path(rast_out).filename().string() : rast_id;
      std::vector<AnnotationSet> sets;
      for (const auto& path : rast_geojson) {
        try {
          sets.push_back(parse_geojson(read_file_text(path), default_layer, id));
        } catch (const Error& e) {
          throw Error(path + ": " + e.what());
        }
      }
      const TissueMap map = build_map(sets, refs(profiles), rast_wsi_w, rast_wsi_h, id, rast_res);
      save_map(map, rast_out);
      if (machine)
        std::cout << ordered_json{{"wsi_id", map.wsi_id}, {"width", map.width()}, {"height", map.height()},
                                  {"scale", map.scale}, {"stem", rast_out}}
                         .dump()
                  << "\n";
      else
        std::cout << "wrote " << rast_out << ".png (" << map.width() << "x" << map.height() << ")\n";
      return 0;
    }

    if (*fuse) {
      const ProfileSet profiles = fuse_profiles.load();
      const LayerKind layer = parse_layer_name(fuse_layer);
      const Profile& profile = profiles[layer_index(layer)];
      TissueMap map;
      if (!fuse_base.empty()) {
        map = load_map(fuse_base);
      } else {
        if (fuse_wsi_w <= 0 || fuse_wsi_h <= 0) throw Error("--wsi-width and --wsi-height are required without --base");
        if (fuse_id.empty()) throw Error("--wsi-id is required without --base");
        const MapSize size = choose_resolution(fuse_wsi_w, fuse_wsi_h, fuse_res);
        map = new_map(size.width, size.height, fuse_wsi_w, fuse_wsi_h, fuse_id);
        for (LayerKind l : kAllLayers) map.profile_hashes[layer_index(l)] = profiles[layer_index(l)].content_hash();
      }
      const auto preds = parse_predictions(read_file_text(fuse_pred), profile, map.wsi_id);
      const int w = static_cast<int>(map.width()), h = static_cast<int>(map.height());
      if (!fuse_binary.empty()) {
        const ClassId cls = static_cast<ClassId>(lookup(profile, fuse_binary));
        std::vector<PatchPrediction> mine;
        for (const auto& p : preds)
          if (p.class_id == cls) mine.push_back(p);
        map.layer(layer) = tmap::fuse_binary(mine, cls, fuse_spec, w, h, map.scale, fuse_threshold);
      } else {
        map.layer(layer) = fuse_multiclass(accumulate(preds, fuse_spec, w, h, map.scale), fuse_threshold);
      }
      map.profile_hashes[layer_index(layer)] = profile.content_hash();
      save_map(map, fuse_out);
      if (machine)
        std::cout << ordered_json{{"wsi_id", map.wsi_id}, {"layer", layer_name(layer)}, {"predictions", preds.size()},
                                  {"stem", fuse_out}}
                         .dump()
                  << "\n";
      else
        std::cout << "fused " << preds.size() << " predictions into " << layer_name(layer) << " layer of "
                  << fuse_out << ".png\n";
      return 0;
    }

    if (*stats) {
      const ProfileSet profiles = stats_profiles.load();
      const TissueMap map = load_map(stats_map);
      check_layer_hash(map, profiles);
      const CompositionSet set = all_compositions(map);
      emit(compositions_doc(map.wsi_id, set, profiles).dump(2) + "\n", stats_out);
      if (!stats_chart.empty()) {
        const NormalizationMode mode = parse_mode_name(stats_mode);
        std::array<CompositionVector, 3> vectors;
        for (LayerKind l : kAllLayers)
          vectors[layer_index(l)] = set[layer_index(l)][static_cast<std::size_t>(mode)];
        write_file_text(stats_chart,
                        to_barchart(vectors, refs(profiles), map.wsi_id + " (" + std::string(mode_name(mode)) + ")"));
      }
      return 0;
    }

    if (*index) {
      const ProfileSet profiles = index_profiles.load();
      const TissueMap map = load_map(index_map);
      check_layer_hash(map, profiles);
      const CompositionSet set = index_stats.empty()
                                     ? all_compositions(map)
                                     : compositions_from_doc(ordered_json::parse(read_file_text(index_stats)), profiles);
      Catalog catalog(index_catalog, profiles);
      CaseMetadata meta;
      if (!index_case.empty()) meta.case_id = index_case;
      const fs::path catalog_dir = fs::absolute(index_catalog).parent_path();
      meta.map_ref = fs::absolute(index_map).lexically_proximate(catalog_dir).string();
      meta.ingested_at = index_time;
      meta.overwrite = index_overwrite;
      const CatalogRecord r = catalog.ingest(map, set, meta);
      if (machine)
        std::cout << ordered_json{{"wsi_id", r.wsi_id}, {"organ_codes", r.organ_codes}, {"catalog_size", catalog.size()}}
                         .dump()
                  << "\n";
      else
        std::cout << "indexed " << r.wsi_id << " (" << catalog.size() << " records)\n";
      return 0;
    }

    if (*search) {
      const ProfileSet profiles = search_profiles.load();
      if (!fs::exists(search_catalog)) throw Error("catalog '" + search_catalog + "' does not exist");
      const Catalog catalog(search_catalog, profiles);
      const NormalizationMode mode = parse_mode_name(search_mode);
      const auto ids = catalog.search(search_query, mode);
      std::string out;
      if (!search_manifest.empty()) {
        out = catalog.export_cohort(ids, parse_manifest_format(search_manifest), search_query);
      } else if (machine) {
        out = ordered_json{{"query", search_query}, {"mode", mode_name(mode)}, {"ids", ids}}.dump(2) + "\n";
      } else {
        for (const auto& id : ids) out += id + "\n";
      }
      emit(out, search_out);
      return 0;
    }

    if (*graph) {
      const ProfileSet profiles = graph_profiles.load();
      const TissueMap map = load_map(graph_map);
      check_layer_hash(map, profiles);
      GraphOptions opts;
      opts.k_nearest = graph_k;
      const RegionGraph g = build_graph(map, opts);
      emit(export_graph(g, refs(profiles)), graph_out);
      if (!graph_edges.empty()) write_file_text(graph_edges, export_edge_list(g));
      return 0;
    }

    if (*render) {
      const ProfileSet profiles = render_profiles.load();
      const TissueMap map = load_map(render_map);
      const LayerKind layer = parse_layer_name(render_layer_name);
      const Profile& profile = profiles[layer_index(layer)];
      if (render_palette) {
        if (map.profile_hashes[layer_index(layer)] != profile.content_hash())
          throw Error("map layer was built with a different profile");
        write_file_bytes(render_out, export_palette_png(map, layer, profile));
      } else {
        std::optional<RgbImage> base;
        if (!render_base.empty()) base = decode_png_rgb(read_file_bytes(render_base));
        write_file_bytes(render_out,
                         encode_png_rgb(render_layer(map, layer, profile, render_alpha, base ? &*base : nullptr)));
      }
      return 0;
    }

    if (*serve) {
      const ProfileSet profiles = serve_profiles.load();
      const Catalog catalog(serve_catalog, profiles);
      Service service(catalog);
      const int port = service.bind(serve_host, serve_port);
      if (port < 0) throw Error("cannot bind " + serve_host + ":" + std::to_string(serve_port));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << catalog.size() << " records on http://" << serve_host << ":" << port << "\n"
                << std::flush;
      service.listen_after_bind();
      g_service = nullptr;
      return 0;
    }

    if (*sample) {
      const ProfileSet profiles = sample_profiles.load();
      const TissueMap map = load_map(sample_map);
      check_layer_hash(map, profiles);
      const LayerKind layer = parse_layer_name(sample_layer);
      const ClassId cls = static_cast<ClassId>(lookup(profiles[layer_index(layer)], sample_class));
      const SampleResult res = sample_patches(map.layer(layer), map.wsi_width, map.wsi_height, map.scale, cls,
                                              sample_count, sample_seed, sample_spec);
      if (machine) {
        ordered_json origins = ordered_json::array();
        for (const auto& o : res.origins) origins.push_back({o.x, o.y});
        std::cout << ordered_json{{"origins", origins}, {"truncated", res.truncated}}.dump() << "\n";
      } else {
        for (const auto& o : res.origins) std::cout << o.x << " " << o.y << "\n";
        if (res.truncated)
          std::cerr << "warning: only " << res.origins.size() << " qualifying patches (requested " << sample_count
                    << ")\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    if (machine)
      std::cerr << ordered_json{{"error", e.what()}, {"kind", "runtime"}}.dump() << "\n";
    else
      std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
