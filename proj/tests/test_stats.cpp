#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "support.hpp"
#include "tmap/stats.hpp"

using namespace tmap;

namespace {

double total(const CompositionVector& v) {
  double s = 0.0;
  for (const auto& [id, r] : v.ratios) s += r;
  return s;
}

TissueMap hand_map() {
  const auto& p = test::shipped_profiles();
  // 4x4: source covers the left 3 columns; tissue has Fat, Dense and UNC
  TissueMap m = new_map(4, 4, 400, 400, "hand");
  for (LayerKind l : kAllLayers) m.profile_hashes[layer_index(l)] = p[layer_index(l)].content_hash();
  m.source.leftCols(3).setConstant(5);
  m.tissue << 9, 9, 5, 0,
              9, 9, 5, 0,
              1, 1, 1, 9,
              0, 0, 0, 9;
  return m;
}

}  // namespace

TEST_SUITE("stats") {
  TEST_CASE("hand-computed compositions of the three modes") {
    const TissueMap m = hand_map();
    const auto img = composition(m, LayerKind::TissueType, NormalizationMode::PerImage);
    CHECK(img.ratio(0) == doctest::Approx(5.0 / 16));
    CHECK(img.ratio(9) == doctest::Approx(6.0 / 16));
    CHECK(img.count(1) == 3);
    CHECK(img.total_pixels == 16);

    // mask = 12 source pixels; inside it the non-NI tissue pixels are 4 fat, 2 dense, 3 UNC
    const auto spec = composition(m, LayerKind::TissueType, NormalizationMode::PerSpecimen);
    CHECK(spec.specimen_pixels == 12);
    CHECK(spec.ratio(9) == doctest::Approx(4.0 / 9));
    CHECK(spec.ratio(5) == doctest::Approx(2.0 / 9));
    CHECK(spec.ratio(1) == doctest::Approx(3.0 / 9));
    CHECK(spec.ratios.count(0) == 0);
    CHECK(spec.count(9) == 6);  // counts always cover the whole layer

    const auto content = composition(m, LayerKind::TissueType, NormalizationMode::PerContent);
    CHECK(content.ratio(9) == doctest::Approx(6.0 / 8));
    CHECK(content.ratio(5) == doctest::Approx(2.0 / 8));
    CHECK(content.ratios.size() == 2);
  }

  TEST_CASE("specimen mask falls back to the layer itself without a source layer") {
    TissueMap m = hand_map();
    m.source.setConstant(kNI);
    const auto v = composition(m, LayerKind::TissueType, NormalizationMode::PerSpecimen);
    CHECK(v.specimen_pixels == 11);
    CHECK(v.ratio(9) == doctest::Approx(6.0 / 11));
  }

  TEST_CASE("empty denominators") {
    TissueMap m = hand_map();
    m.alteration.setConstant(kUNC);
    CHECK_THROWS_AS(composition(m, LayerKind::Alteration, NormalizationMode::PerContent), EmptyDenominatorError);
    m.alteration.setConstant(kNI);
    CHECK_THROWS_AS(composition(m, LayerKind::Alteration, NormalizationMode::PerSpecimen), EmptyDenominatorError);
    const auto set = all_compositions(m);
    const auto& v = set[2][static_cast<std::size_t>(NormalizationMode::PerSpecimen)];
    CHECK(v.ratios.empty());
    CHECK(v.count(kNI) == 16);
    CHECK(total(set[2][0]) == doctest::Approx(1.0));
  }

  TEST_CASE("sum identities and naive recount on random maps") {
    test::Gen g(23);
    for (int trial = 0; trial < 60; ++trial) {
      const TissueMap m = g.map(test::shipped_profiles(), g.integer(1, 40), g.integer(1, 40), "m");
      for (LayerKind l : kAllLayers) {
        const auto counts = oracle::recount(m.layer(l));
        for (NormalizationMode mode : kAllModes) {
          CompositionVector v;
          try {
            v = composition(m, l, mode);
          } catch (const EmptyDenominatorError&) {
            continue;
          }
          CHECK(std::abs(total(v) - 1.0) <= 1e-9);
          CHECK(v.pixel_counts == counts);
          if (mode == NormalizationMode::PerContent)
            for (const auto& [id, r] : v.ratios) CHECK_FALSE(is_sentinel(id));
          if (mode == NormalizationMode::PerSpecimen) CHECK(v.ratios.count(kNI) == 0);
        }
      }
    }
  }

  TEST_CASE("rollup adds descendants into ancestors") {
    const Profile& t = test::shipped_profiles()[1];
    const TissueMap m = hand_map();
    const auto v = composition(m, LayerKind::TissueType, NormalizationMode::PerContent);
    const auto r = rollup(v, t);
    CHECK(r.ratio(4) == doctest::Approx(1.0));  // Connective-Tissue = Fat + Dense
    CHECK(r.ratio(9) == v.ratio(9));
    CHECK(r.count(4) == 8);

    CompositionVector bad = v;
    bad.ratios[200] = 0.0;
    CHECK_THROWS_AS(rollup(bad, t), StatsError);
  }

  TEST_CASE("rollup keeps antichain sums") {
    test::Gen g(31);
    const auto& profiles = test::shipped_profiles();
    for (int trial = 0; trial < 40; ++trial) {
      const TissueMap m = g.map(profiles, 20, 20, "m");
      for (LayerKind l : kAllLayers) {
        const Profile& p = profiles[layer_index(l)];
        CompositionVector v;
        try {
          v = composition(m, l, NormalizationMode::PerContent);
        } catch (const EmptyDenominatorError&) {
          continue;
        }
        const auto r = rollup(v, p);
        double roots = 0.0;
        for (const auto& e : p.entries())
          if (e.parent_id == -1) roots += r.ratio(e.id);
        CHECK(std::abs(roots - 1.0) <= 1e-9);
        for (const auto& e : p.entries())
          CHECK(std::abs(r.ratio(e.id) - oracle::subtree_sum(v.ratios, p.entries(), e.id)) <= 1e-12);
      }
    }
  }

  TEST_CASE("JSON keyed by class code round-trips") {
    const auto& p = test::shipped_profiles();
    const TissueMap m = hand_map();
    for (NormalizationMode mode : kAllModes) {
      const auto v = composition(m, LayerKind::TissueType, mode);
      const auto j = to_json(v, p[1]);
      CHECK(j["mode"] == std::string(mode_name(mode)));
      CHECK(composition_from_json(j, p[1]) == v);
    }
    const auto j = to_json(composition(m, LayerKind::TissueType, NormalizationMode::PerContent), p[1]);
    CHECK(j["ratios"].contains("C12472"));
    CHECK(parse_mode_name("per_content") == NormalizationMode::PerContent);
    CHECK_THROWS_AS(parse_mode_name("per_slide"), StatsError);
    CHECK_THROWS_AS(composition_from_json(nlohmann::ordered_json::object(), p[1]), StatsError);
  }

  TEST_CASE("bar segments tile the bar") {
    const auto& p = test::shipped_profiles();
    test::Gen g(2);
    for (int trial = 0; trial < 50; ++trial) {
      const TissueMap m = g.map(p, 16, 16, "b");
      const auto v = composition(m, LayerKind::Source, NormalizationMode::PerImage);
      const auto segs = bar_segments(v, p[0], kBarWidth);
      int x = 0, width = 0;
      for (const auto& s : segs) {
        CHECK(s.x == x);
        x += s.width;
        width += s.width;
        // each width is within a pixel of the proportional width
        CHECK(std::abs(s.width - v.ratio(s.class_id) * kBarWidth) <= 1.0);
      }
      CHECK(width == kBarWidth);
    }
  }

  TEST_CASE("bar chart is an SVG with one rect per visible segment") {
    const auto& p = test::shipped_profiles();
    const TissueMap m = hand_map();
    const auto set = all_compositions(m);
    std::array<CompositionVector, 3> v{set[0][1], set[1][1], set[2][1]};
    const std::string svg = to_barchart(v, test::profile_refs(p), "hand <1>");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("hand &lt;1&gt;") != std::string::npos);
    CHECK(svg.find("data-class=\"Connective-Tissue-Fat\"") != std::string::npos);
    CHECK(svg.find("44.44 %") != std::string::npos);
    CHECK(svg.find("no data") != std::string::npos);  // alteration is all NI
    std::size_t n = 0;
    for (std::size_t pos = 0; (pos = svg.find("class=\"segment\"", pos)) != std::string::npos; ++pos) ++n;
    CHECK(n == 4);  // source: Breast; tissue: UNC, Dense, Fat
  }
}
