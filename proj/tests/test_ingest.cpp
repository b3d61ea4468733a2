#include <doctest.h>

#include "oracles.hpp"
#include "support.hpp"
#include "tmap/ingest.hpp"

using namespace tmap;

namespace {

std::string feature(const std::string& geometry, const std::string& key, const std::string& layer = "") {
  std::string props = "\"classification\":{\"name\":\"" + key + "\"}";
  if (!layer.empty()) props += ",\"layer\":\"" + layer + "\"";
  return "{\"type\":\"Feature\",\"geometry\":" + geometry + ",\"properties\":{" + props + "}}";
}

std::string collection(const std::vector<std::string>& features) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < features.size(); ++i) out += (i ? "," : "") + features[i];
  return out + "]}";
}

const std::string kSquare = "{\"type\":\"Polygon\",\"coordinates\":[[[0,0],[10,0],[10,10],[0,10],[0,0]]]}";

Annotation rect(LayerKind layer, const std::string& key, double x0, double y0, double x1, double y1, int order) {
  Annotation a;
  a.layer = layer;
  a.class_key = key;
  a.exterior = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
  a.order_index = order;
  return a;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("geojson: polygons, multipolygons, layer override, holes") {
    const std::string multi =
        "{\"type\":\"MultiPolygon\",\"coordinates\":[[[[0,0],[4,0],[4,4],[0,0]]],"
        "[[[5,5],[9,5],[9,9],[5,9],[5,5]],[[6,6],[7,6],[7,7],[6,6]]]]}";
    const auto set = parse_geojson(collection({feature(kSquare, "Nerve"), feature(multi, "C50", "source")}),
                                   LayerKind::TissueType, "w1");
    CHECK(set.wsi_id == "w1");
    CHECK(set.source_tool == "QuPath");
    REQUIRE(set.annotations.size() == 3);
    CHECK(set.annotations[0].layer == LayerKind::TissueType);
    CHECK(set.annotations[0].class_key == "Nerve");
    CHECK(set.annotations[1].layer == LayerKind::Source);
    CHECK(set.annotations[2].holes.size() == 1);
    CHECK(set.annotations[2].order_index == 2);
    // open rings get closed
    CHECK(set.annotations[2].holes[0].front() == set.annotations[2].holes[0].back());
  }

  TEST_CASE("geojson errors name the feature") {
    CHECK_THROWS_WITH_AS(parse_geojson("[]", LayerKind::TissueType), doctest::Contains("FeatureCollection"),
                         AnnotationError);
    CHECK_THROWS_AS(parse_geojson("{oops", LayerKind::TissueType), AnnotationError);
    const std::string point = "{\"type\":\"Point\",\"coordinates\":[1,2]}";
    CHECK_THROWS_WITH_AS(parse_geojson(collection({feature(kSquare, "A"), feature(point, "B")}), LayerKind::TissueType),
                         doctest::Contains("feature 1"), AnnotationError);
    const std::string line = "{\"type\":\"Polygon\",\"coordinates\":[[[0,0],[1,1],[0,0]]]}";
    CHECK_THROWS_WITH_AS(parse_geojson(collection({feature(line, "A")}), LayerKind::TissueType),
                         doctest::Contains("feature 0"), AnnotationError);
    CHECK_THROWS_AS(parse_geojson(collection({feature(kSquare, "A", "stroma")}), LayerKind::TissueType),
                    AnnotationError);
    CHECK_THROWS_AS(parse_geojson(collection({"{\"type\":\"Feature\",\"geometry\":" + kSquare + "}"}),
                                  LayerKind::TissueType),
                    AnnotationError);
  }

  TEST_CASE("choose_resolution") {
    CHECK(choose_resolution(100000, 50000) == MapSize{1024, 512});
    CHECK(choose_resolution(30000, 90000, 1500) == MapSize{500, 1500});
    CHECK(choose_resolution(10240, 10240) == MapSize{1024, 1024});
    // floor(1 * 1024 / 500) = 2
    CHECK(choose_resolution(500, 1) == MapSize{1024, 2});
    CHECK(choose_resolution(100000, 1) == MapSize{1024, 1});
    CHECK_THROWS_AS(choose_resolution(100, 100, 999), Error);
    CHECK_THROWS_AS(choose_resolution(100, 100, 2001), Error);
    CHECK_THROWS_AS(choose_resolution(0, 100), Error);
  }

  TEST_CASE("rasterize: deeper classes paint over shallower ones, later over earlier") {
    const Profile& t = test::shipped_profiles()[1];
    AnnotationSet set;
    // the deep annotation comes first in the file and still wins
    set.annotations.push_back(rect(LayerKind::TissueType, "Connective-Tissue-Fat", 2, 2, 6, 6, 0));
    set.annotations.push_back(rect(LayerKind::TissueType, "Connective-Tissue", 0, 0, 8, 8, 1));
    set.annotations.push_back(rect(LayerKind::TissueType, "Nerve", 6, 0, 8, 2, 2));
    set.annotations.push_back(rect(LayerKind::TissueType, "Muscle", 7, 0, 8, 1, 3));
    set.annotations.push_back(rect(LayerKind::Source, "C50", 0, 0, 8, 8, 4));
    const LayerGrid g = rasterize(set, t, 10, 10, 1.0);
    CHECK(g(3, 3) == lookup(t, "Connective-Tissue-Fat"));
    CHECK(g(0, 0) == lookup(t, "Connective-Tissue"));
    CHECK(g(1, 6) == lookup(t, "Nerve"));
    CHECK(g(0, 7) == lookup(t, "Muscle"));
    CHECK(g(9, 9) == kNI);
    CHECK(g == oracle::rasterize(set, t, 10, 10, 1.0));
  }

  TEST_CASE("rasterize: holes and pixel centres") {
    const Profile& t = test::shipped_profiles()[1];
    AnnotationSet set;
    Annotation a = rect(LayerKind::TissueType, "Epithelium", 0, 0, 20, 20, 0);
    a.holes.push_back({{4, 4}, {16, 4}, {16, 16}, {4, 16}, {4, 4}});
    set.annotations.push_back(a);
    const LayerGrid g = rasterize(set, t, 10, 10, 0.5);
    CHECK(g(0, 0) == 12);
    CHECK(g(2, 2) == kNI);
    CHECK(g(1, 7) == 12);
    CHECK((g.array() == 12).count() == 100 - 36);

    // a sliver narrower than a pixel that misses every centre paints nothing
    AnnotationSet thin;
    thin.annotations.push_back(rect(LayerKind::TissueType, "Nerve", 1.1, 0, 1.4, 10, 0));
    CHECK((rasterize(thin, t, 10, 10, 1.0).array() == kNI).all());
  }

  TEST_CASE("rasterize collects every unresolvable key") {
    const Profile& t = test::shipped_profiles()[1];
    AnnotationSet set;
    set.annotations.push_back(rect(LayerKind::TissueType, "Bone", 0, 0, 2, 2, 0));
    set.annotations.push_back(rect(LayerKind::TissueType, "Nerve", 0, 0, 2, 2, 1));
    set.annotations.push_back(rect(LayerKind::TissueType, "Cartilage", 0, 0, 2, 2, 2));
    set.annotations.push_back(rect(LayerKind::Alteration, "Nonsense", 0, 0, 2, 2, 3));
    try {
      rasterize(set, t, 4, 4, 1.0);
      FAIL("expected AnnotationError");
    } catch (const AnnotationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("'Bone'") != std::string::npos);
      CHECK(msg.find("'Cartilage'") != std::string::npos);
      CHECK(msg.find("Nonsense") == std::string::npos);
    }
  }

  TEST_CASE("rasterize matches the point-in-polygon oracle on random sets") {
    const auto& profiles = test::shipped_profiles();
    test::Gen g(29);
    for (int trial = 0; trial < 60; ++trial) {
      const int w = g.integer(1, 40), h = g.integer(1, 40);
      static const std::vector<double> scales{1.0, 0.5, 0.25, 0.1, 0.3};
      const double scale = g.pick(scales);
      const LayerKind layer = kAllLayers[static_cast<std::size_t>(g.integer(0, 2))];
      const Profile& p = profiles[layer_index(layer)];
      AnnotationSet set;
      const int n = g.integer(0, 6);
      for (int i = 0; i < n; ++i) {
        Annotation a;
        a.layer = g.chance(0.8) ? layer : kAllLayers[static_cast<std::size_t>(g.integer(0, 2))];
        const auto& entries = profiles[layer_index(a.layer)].entries();
        a.class_key = entries[static_cast<std::size_t>(g.integer(0, static_cast<int>(entries.size()) - 1))].code;
        a.exterior = g.ring(w / scale, h / scale);
        if (g.chance(0.3)) a.holes.push_back(g.ring(w / scale, h / scale));
        a.order_index = i;
        set.annotations.push_back(a);
      }
      INFO("trial " << trial);
      CHECK(rasterize(set, p, w, h, scale) == oracle::rasterize(set, p, w, h, scale));
    }
  }

  TEST_CASE("build_map rasterizes all layers and stamps the profile hashes") {
    const auto& profiles = test::shipped_profiles();
    AnnotationSet a;
    a.annotations.push_back(rect(LayerKind::Source, "C50", 0, 0, 20000, 10000, 0));
    AnnotationSet b;
    b.annotations.push_back(rect(LayerKind::Alteration, "Necrosis", 0, 0, 5000, 5000, 0));
    b.annotations.push_back(rect(LayerKind::Alteration, "Inflammation", 0, 0, 5000, 5000, 1));
    const TissueMap m = build_map({a, b}, test::profile_refs(profiles), 20000, 10000, "slide");
    CHECK(m.width() == 1024);
    CHECK(m.height() == 512);
    CHECK((m.source.array() == 5).all());
    CHECK((m.tissue.array() == kNI).all());
    // equal depth: the later annotation (second file) wins
    CHECK(m.alteration(10, 10) == lookup(profiles[2], "Inflammation"));
    for (LayerKind l : kAllLayers) CHECK(m.profile_hashes[layer_index(l)] == profiles[layer_index(l)].content_hash());
    CHECK_NOTHROW(check_map(m));
  }
}
