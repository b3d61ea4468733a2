#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "tmap/catalog.hpp"
#include "tmap/ingest.hpp"
#include "tmap/profile.hpp"
#include "tmap/query.hpp"
#include "tmap/tissue_map.hpp"

namespace tmap::test {

inline std::string fixture(const std::string& rel) { return std::string(TMAP_FIXTURES_DIR) + "/" + rel; }

inline const ProfileSet& shipped_profiles() {
  static const ProfileSet p{load_profile(fixture("profiles/source.csv"), LayerKind::Source),
                            load_profile(fixture("profiles/tissue.csv"), LayerKind::TissueType),
                            load_profile(fixture("profiles/alteration.csv"), LayerKind::Alteration)};
  return p;
}

inline std::array<const Profile*, 3> profile_refs(const ProfileSet& p) { return {&p[0], &p[1], &p[2]}; }

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "tmap-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct CliResult {
  int status = -1;
  std::string out;
};

/// Runs the CLI through the shell; stderr is folded into `out` when
/// `merge_stderr` is set.
inline CliResult run_cli(const std::string& args, bool merge_stderr = false) {
  std::string cmd = std::string("'") + TMAP_CLI_PATH + "' " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

inline std::string profile_flags() {
  return "--source-profile '" + fixture("profiles/source.csv") + "' --tissue-profile '" +
         fixture("profiles/tissue.csv") + "' --alteration-profile '" + fixture("profiles/alteration.csv") + "'";
}

inline std::string quoted(const std::string& s) { return "'" + s + "'"; }

struct PipelineResult {
  bool ok = false;
  std::string log;     // everything the CLI printed while building
  std::string search;  // stdout of the final search
};

/// rasterize -> stats -> index for every fixture slide, then one search.
inline PipelineResult run_pipeline(const TempDir& dir, const std::string& query) {
  PipelineResult out;
  const std::string catalog = quoted(dir / "catalog.jsonl");
  for (const char* slide : {"slide-A", "slide-B", "slide-C", "slide-D"}) {
    const std::string stem = dir / slide;
    const std::vector<std::string> steps{
        "rasterize " + profile_flags() + " --geojson " + quoted(fixture(std::string("annotations/") + slide + ".geojson")) +
            " --wsi-width 10240 --wsi-height 10240 --wsi-id " + slide + " -o " + quoted(stem),
        "stats " + profile_flags() + " --map " + quoted(stem) + " -o " + quoted(stem + ".stats.json") +
            " --barchart " + quoted(stem + ".svg"),
        "index " + profile_flags() + " --map " + quoted(stem) + " --stats " + quoted(stem + ".stats.json") +
            " --catalog " + catalog + " --case-id case-" + slide + " --ingested-at 2024-01-01T00:00:00Z"};
    for (const auto& step : steps) {
      const CliResult r = run_cli(step, true);
      out.log += r.out;
      if (r.status != 0) return out;
    }
  }
  const CliResult r = run_cli("search " + profile_flags() + " --catalog " + catalog + " -q " + quoted(query));
  out.search = r.out;
  out.ok = r.status == 0;
  return out;
}

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool chance(double p) { return real(0.0, 1.0) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))];
  }
  std::mt19937_64& engine() { return rng_; }

  /// Patchy grid: random rectangles of ids from `ids` painted over a fill.
  LayerGrid grid(int w, int h, const std::vector<int>& ids, int rects = 6) {
    LayerGrid g = LayerGrid::Constant(h, w, static_cast<ClassId>(pick(ids)));
    for (int i = 0; i < rects; ++i) {
      const int x0 = integer(0, w - 1), y0 = integer(0, h - 1);
      const int x1 = integer(x0, w - 1), y1 = integer(y0, h - 1);
      g.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1).setConstant(static_cast<ClassId>(pick(ids)));
    }
    // salt: isolated pixels exercise single-pixel components
    for (int i = 0; i < (w * h) / 20; ++i) g(integer(0, h - 1), integer(0, w - 1)) = static_cast<ClassId>(pick(ids));
    return g;
  }

  static std::vector<int> ids_of(const Profile& p) {
    std::vector<int> out;
    for (const auto& e : p.entries()) out.push_back(e.id);
    return out;
  }

  /// Map whose layers draw ids from the shipped profiles.
  TissueMap map(const ProfileSet& profiles, int w, int h, const std::string& id) {
    const std::int64_t ww = static_cast<std::int64_t>(w) * 8, wh = static_cast<std::int64_t>(h) * 8;
    TissueMap m = new_map(w, h, ww, wh, id);
    for (LayerKind l : kAllLayers) {
      const auto& p = profiles[layer_index(l)];
      auto ids = ids_of(p);
      // favour a handful of classes per map so regions stay large
      std::vector<int> subset;
      for (int i = 0; i < 4; ++i) subset.push_back(pick(ids));
      subset.push_back(kNI);
      m.layer(l) = grid(w, h, subset, integer(0, 10));
      m.profile_hashes[layer_index(l)] = p.content_hash();
    }
    if (chance(0.15)) m.source.setConstant(kNI);
    if (chance(0.5)) m.microns_per_pixel = real(0.1, 4.0);
    return m;
  }

  /// Random ring on integer level-0 coordinates inside [0,w)x[0,h).
  Ring ring(double w, double h, int min_vertices = 3, int max_vertices = 9) {
    const int n = integer(min_vertices, max_vertices);
    Ring r;
    for (int i = 0; i < n; ++i)
      r.emplace_back(static_cast<double>(integer(-2, static_cast<int>(w) + 2)),
                     static_cast<double>(integer(-2, static_cast<int>(h) + 2)));
    r.push_back(r.front());
    return r;
  }

  /// Query over the shipped profiles.
  Query query(const ProfileSet& profiles, int depth) {
    const int choice = depth <= 0 ? integer(0, 2) : integer(0, 6);
    auto key_for = [&](LayerKind l) {
      const auto& e = profiles[layer_index(l)].entries();
      const auto& entry = e[static_cast<std::size_t>(integer(0, static_cast<int>(e.size()) - 1))];
      return chance(0.5) ? entry.code : entry.name;
    };
    auto layer = [&] { return kAllLayers[static_cast<std::size_t>(integer(0, 2))]; };
    switch (choice) {
      case 0: {
        const LayerKind l = layer();
        static const std::vector<double> thresholds{0.0, 0.05, 0.1, 0.25, 0.3, 0.5, 0.75, 1.0};
        const double t = chance(0.5) ? pick(thresholds) : real(0.0, 1.0);
        return QueryNode::comparison(l, key_for(l), static_cast<CompareOp>(integer(0, 4)), t,
                                     kAllModes[static_cast<std::size_t>(integer(0, 2))]);
      }
      case 1: {
        const auto& e = profiles[0].entries();
        return QueryNode::organ(e[static_cast<std::size_t>(integer(0, static_cast<int>(e.size()) - 1))].code);
      }
      case 2: {
        const LayerKind l = layer();
        return QueryNode::has(l, key_for(l));
      }
      case 3: return QueryNode::negate(query(profiles, depth - 1));
      case 4:
      case 5: {
        std::vector<QueryNode> kids;
        const int n = integer(2, 3);
        for (int i = 0; i < n; ++i) kids.push_back(query(profiles, depth - 1));
        return QueryNode::conj(std::move(kids));
      }
      default: {
        std::vector<QueryNode> kids;
        const int n = integer(2, 3);
        for (int i = 0; i < n; ++i) kids.push_back(query(profiles, depth - 1));
        return QueryNode::disj(std::move(kids));
      }
    }
  }

 private:
  std::mt19937_64 rng_;
};

/// Catalog record built straight from a random map.
inline CatalogRecord record_for(const TissueMap& m, const ProfileSet& profiles) {
  CaseMetadata meta;
  meta.case_id = "case-" + m.wsi_id;
  meta.map_ref = m.wsi_id;
  meta.ingested_at = "2024-01-01T00:00:00Z";
  return make_record(m, all_compositions(m), profiles, meta);
}

}  // namespace tmap::test
