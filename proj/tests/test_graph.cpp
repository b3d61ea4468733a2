#include <doctest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "support.hpp"
#include "tmap/graph.hpp"

using namespace tmap;

namespace {

TissueMap blank(int w, int h) { return new_map(w, h, w * 4, h * 4, "g"); }

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("two separated blobs of one class are two regions") {
    LayerGrid g = LayerGrid::Constant(6, 8, kNI);
    g.block(0, 0, 2, 2).setConstant(9);
    g.block(4, 5, 2, 3).setConstant(9);
    const auto regions = extract_regions(g, LayerKind::Alteration);
    REQUIRE(regions.size() == 2);
    CHECK(regions[0].pixel_count == 4);
    CHECK(regions[0].centroid.isApprox(Eigen::Vector2d(0.5, 0.5)));
    CHECK(regions[0].bbox == BoundingBox{0, 0, 1, 1});
    CHECK(regions[1].pixel_count == 6);
    CHECK(regions[1].centroid.isApprox(Eigen::Vector2d(6.0, 4.5)));
    CHECK(regions[1].bbox == BoundingBox{5, 4, 7, 5});
  }

  TEST_CASE("diagonal neighbours are not connected") {
    LayerGrid g = LayerGrid::Constant(2, 2, kNI);
    g(0, 0) = 4;
    g(1, 1) = 4;
    CHECK(extract_regions(g, LayerKind::Source).size() == 2);
  }

  TEST_CASE("sentinels never form regions") {
    LayerGrid g(2, 4);
    g << kNI, kUNC, kUNK, kNV, kUNC, kUNC, kNI, kNV;
    CHECK(extract_regions(g, LayerKind::TissueType).empty());
    const RegionGraph rg = build_graph(blank(4, 4));
    CHECK(rg.nodes.empty());
    CHECK(rg.intra_edges.empty());
    CHECK(rg.cross_edges.empty());
  }

  TEST_CASE("single pixel region") {
    LayerGrid g = LayerGrid::Constant(6, 5, kNI);
    g(4, 3) = 7;
    const auto r = extract_regions(g, LayerKind::Source);
    REQUIRE(r.size() == 1);
    CHECK(r[0].centroid == Eigen::Vector2d(3.0, 4.0));
    CHECK(r[0].bbox == BoundingBox{3, 4, 3, 4});
  }

  TEST_CASE("intra edge weight is the centroid distance") {
    TissueMap m = blank(6, 6);
    m.tissue(0, 0) = 10;
    m.tissue(4, 3) = 11;
    const RegionGraph g = build_graph(m);
    REQUIRE(g.nodes.size() == 2);
    REQUIRE(g.intra_edges.size() == 1);
    CHECK(g.intra_edges[0].distance == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(g.cross_edges.empty());
  }

  TEST_CASE("cross edge weight is the overlap area") {
    TissueMap m = blank(8, 8);
    m.source.block(0, 0, 4, 4).setConstant(5);   // 16 px
    m.tissue.block(2, 2, 2, 5).setConstant(10);  // overlaps source on 2x2
    m.alteration.block(0, 0, 8, 8).setConstant(9);
    const RegionGraph g = build_graph(m);
    REQUIRE(g.nodes.size() == 3);
    CHECK(g.nodes[0].layer == LayerKind::Source);
    CHECK(g.nodes[1].layer == LayerKind::TissueType);
    CHECK(g.nodes[2].layer == LayerKind::Alteration);
    std::map<std::pair<std::size_t, std::size_t>, std::int64_t> got;
    for (const auto& e : g.cross_edges) got[{e.a, e.b}] = e.overlap;
    CHECK(got == std::map<std::pair<std::size_t, std::size_t>, std::int64_t>{{{0, 1}, 4}, {{0, 2}, 16}, {{1, 2}, 10}});
  }

  TEST_CASE("flood fill agrees with union-find on random grids") {
    test::Gen gen(101);
    for (int trial = 0; trial < 150; ++trial) {
      const int w = gen.integer(1, 40), h = gen.integer(1, 40);
      const LayerGrid g = gen.grid(w, h, {0, 1, 4, 5, 6, 7}, gen.integer(0, 12));
      auto expected = oracle::components(g);
      const auto regions = extract_regions(g, LayerKind::TissueType);
      std::size_t count = 0;
      const auto labels = label_regions(g, &count);
      REQUIRE(regions.size() == expected.size());
      REQUIRE(count == expected.size());
      std::int64_t covered = 0;
      for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& c = expected[i];
        const auto& r = regions[i];
        CHECK(r.class_id == c.class_id);
        CHECK(r.pixel_count == static_cast<std::int64_t>(c.pixels.size()));
        double sx = 0, sy = 0;
        int x0 = w, y0 = h, x1 = -1, y1 = -1;
        for (int p : c.pixels) {
          const int x = p % w, y = p / w;
          sx += x;
          sy += y;
          x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
          CHECK(labels(y, x) == static_cast<std::int32_t>(i));
        }
        CHECK(r.centroid.x() == doctest::Approx(sx / c.pixels.size()).epsilon(1e-12));
        CHECK(r.centroid.y() == doctest::Approx(sy / c.pixels.size()).epsilon(1e-12));
        CHECK(r.bbox == BoundingBox{x0, y0, x1, y1});
        covered += r.pixel_count;
      }
      std::int64_t non_sentinel = 0;
      for (Eigen::Index y = 0; y < g.rows(); ++y)
        for (Eigen::Index x = 0; x < g.cols(); ++x) {
          if (is_sentinel(g(y, x))) {
            non_sentinel += 0;
            CHECK(labels(y, x) == -1);
          } else {
            ++non_sentinel;
          }
        }
      CHECK(covered == non_sentinel);
    }
  }

  TEST_CASE("graph totals and metric properties on random maps") {
    const auto& profiles = test::shipped_profiles();
    test::Gen gen(202);
    for (int trial = 0; trial < 60; ++trial) {
      const TissueMap m = gen.map(profiles, gen.integer(2, 24), gen.integer(2, 24), "t");
      const RegionGraph g = build_graph(m);
      std::array<std::vector<std::size_t>, 3> by_layer;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) by_layer[layer_index(g.nodes[i].layer)].push_back(i);

      // per layer, region areas add up to the non-sentinel area
      for (LayerKind l : kAllLayers) {
        std::int64_t area = 0, expected = 0;
        for (auto i : by_layer[layer_index(l)]) area += g.nodes[i].pixel_count;
        for (const auto& [id, n] : oracle::recount(m.layer(l)))
          if (!is_sentinel(id)) expected += n;
        CHECK(area == expected);
      }

      // complete intra graph per layer
      std::size_t pairs = 0;
      for (const auto& v : by_layer) pairs += v.size() * (v.size() - (v.empty() ? 0 : 1)) / 2;
      CHECK(g.intra_edges.size() == pairs);
      std::map<std::pair<std::size_t, std::size_t>, double> dist;
      for (const auto& e : g.intra_edges) {
        CHECK(e.a < e.b);
        CHECK(g.nodes[e.a].layer == g.nodes[e.b].layer);
        CHECK(e.distance == doctest::Approx((g.nodes[e.a].centroid - g.nodes[e.b].centroid).norm()));
        dist[{e.a, e.b}] = e.distance;
      }
      auto d = [&](std::size_t a, std::size_t b) { return a < b ? dist.at({a, b}) : dist.at({b, a}); };
      for (const auto& v : by_layer)
        for (std::size_t i = 0; i < v.size() && i < 8; ++i)
          for (std::size_t j = i + 1; j < v.size() && j < 8; ++j)
            for (std::size_t k = j + 1; k < v.size() && k < 8; ++k) {
              CHECK(d(v[i], v[k]) <= d(v[i], v[j]) + d(v[j], v[k]) + 1e-9);
              CHECK(d(v[i], v[j]) <= d(v[i], v[k]) + d(v[k], v[j]) + 1e-9);
            }

      // each region's overlaps with another layer add up to at most its area,
      // and exactly when that layer has no sentinel under it
      std::map<std::pair<std::size_t, int>, std::int64_t> overlap_sum;
      for (const auto& e : g.cross_edges) {
        CHECK(e.overlap > 0);
        CHECK(layer_index(g.nodes[e.a].layer) < layer_index(g.nodes[e.b].layer));
        overlap_sum[{e.a, static_cast<int>(layer_index(g.nodes[e.b].layer))}] += e.overlap;
        overlap_sum[{e.b, static_cast<int>(layer_index(g.nodes[e.a].layer))}] += e.overlap;
      }
      for (const auto& [key, s] : overlap_sum) CHECK(s <= g.nodes[key.first].pixel_count);
    }
  }

  TEST_CASE("k-nearest pruning keeps a symmetric neighbourhood") {
    TissueMap m = blank(20, 1);
    for (int x = 0; x < 20; x += 2) m.tissue(0, x) = 10;  // ten regions on a line
    const RegionGraph full = build_graph(m);
    CHECK(full.intra_edges.size() == 45);
    const RegionGraph pruned = build_graph(m, GraphOptions{1});
    // nearest neighbours on a line at equal spacing, ties to the lower index
    CHECK(pruned.intra_edges.size() == 9);
    for (const auto& e : pruned.intra_edges) {
      CHECK(e.b == e.a + 1);
      CHECK(e.distance == doctest::Approx(2.0));
    }
    const RegionGraph k2 = build_graph(m, GraphOptions{2});
    for (const auto& e : k2.intra_edges) CHECK(e.distance <= 4.0 + 1e-12);
    CHECK_THROWS_AS(build_graph(m, GraphOptions{0}), GraphError);
  }

  TEST_CASE("export and import round trip") {
    const auto& profiles = test::shipped_profiles();
    const auto refs = test::profile_refs(profiles);
    test::Gen gen(303);
    for (int trial = 0; trial < 20; ++trial) {
      const TissueMap m = gen.map(profiles, gen.integer(2, 16), gen.integer(2, 16), "rt");
      const RegionGraph g = build_graph(m, trial % 2 ? GraphOptions{2} : GraphOptions{});
      const std::string text = export_graph(g, refs);
      const RegionGraph back = import_graph(text, refs);
      CHECK(back.nodes.size() == g.nodes.size());
      CHECK(back.intra_edges.size() == g.intra_edges.size());
      CHECK(back.cross_edges == g.cross_edges);
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        CHECK(back.nodes[i].class_id == g.nodes[i].class_id);
        CHECK(back.nodes[i].bbox == g.nodes[i].bbox);
        CHECK(back.nodes[i].centroid.isApprox(g.nodes[i].centroid, 1e-12));
      }
      CHECK(export_graph(back, refs) == text);
    }
  }

  TEST_CASE("exported nodes carry resolvable class codes") {
    const auto& profiles = test::shipped_profiles();
    TissueMap m = blank(4, 4);
    m.source.setConstant(5);
    m.alteration.block(0, 0, 2, 2).setConstant(5);
    const auto j = nlohmann::json::parse(export_graph(build_graph(m), test::profile_refs(profiles)));
    REQUIRE(j["nodes"].size() == 2);
    CHECK(j["nodes"][0]["class_code"] == "C50");
    CHECK(j["nodes"][0]["layer"] == "source");
    CHECK(j["nodes"][1]["class_code"] == "C9305");
    CHECK(j["nodes"][1]["layer"] == "alteration");
    REQUIRE(j["edges"].size() == 1);
    CHECK(j["edges"][0]["kind"] == "cross");
    CHECK(j["edges"][0]["weight"] == 4);

    auto broken = j;
    broken["nodes"][1]["class_code"] = "C0000";
    CHECK_THROWS(import_graph(broken.dump(), test::profile_refs(profiles)));
  }

  TEST_CASE("edge list export") {
    TissueMap m = blank(6, 6);
    m.tissue(0, 0) = 10;
    m.tissue(4, 3) = 11;
    m.alteration(0, 0) = 9;
    CHECK(export_edge_list(build_graph(m)) == "0 1 intra 5\n0 2 cross 1\n");
  }
}
