#include <set>

#include "doctest.h"
#include "pfl/annot.hpp"
#include "pfl/fileio.hpp"
#include "support.hpp"

using namespace pfl;

namespace {

SuperpixelMap random_map(std::mt19937_64& rng, int w, int h) {
  std::vector<std::int32_t> noise(static_cast<std::size_t>(w) * h);
  // coarse blocks with jitter so components vary in size and shape
  const int bw = 3 + static_cast<int>(rng() % 6);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) noise[y * w + x] = static_cast<std::int32_t>((y / bw) * 7 + (x / bw) + (rng() % 5 == 0));
  }
  return enforce_connectivity(w, h, noise, std::size_t{3});
}

Annotation random_annotation(std::mt19937_64& rng, const SuperpixelMap& map) {
  Annotation a;
  a.frame_id = "frame-" + std::to_string(rng() % 1000);
  a.superpixel_ref = content_hash(map);
  std::set<std::int32_t> sel;
  for (int l = 0; l < map.n_labels; ++l) {
    if (rng() % 3 == 0) sel.insert(l);
  }
  a.selected.assign(sel.begin(), sel.end());
  a.erased = testing::random_mask(map.width, map.height, rng, 0.15);
  a.author = "tester";
  a.timestamp = "2024-03-05T12:34:56Z";
  return a;
}

}  // namespace

TEST_CASE("compose: empty and full selections") {
  std::mt19937_64 rng(1);
  const SuperpixelMap map = random_map(rng, 20, 16);
  Annotation a = random_annotation(rng, map);
  a.selected.clear();
  CHECK(compose_mask(map, a).empty());
  a.erased = Mask(20, 16);
  for (int l = 0; l < map.n_labels; ++l) a.selected.push_back(l);
  CHECK(compose_mask(map, a).count() == 320);
}

TEST_CASE("compose: erasing part of one superpixel") {
  std::vector<std::int32_t> labels(10 * 8, 1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 10; ++x) labels[y * 10 + x] = 0;
  }
  const SuperpixelMap map{10, 8, 2, labels};
  Annotation a;
  a.frame_id = "f";
  a.superpixel_ref = content_hash(map);
  a.selected = {0};
  a.erased = Mask::from_runs(10, 8, {{0, 0, 10}});
  a.timestamp = "2024-01-01T00:00:00Z";
  const Mask m = compose_mask(map, a);
  CHECK(m.count() == 30);
  const auto bits = m.to_bitmap();
  for (int k = 0; k < 80; ++k) CHECK((bits[k] != 0) == (k >= 10 && k < 40));
}

TEST_CASE("compose agrees with pixel enumeration on random triples") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const SuperpixelMap map = random_map(rng, 12 + static_cast<int>(rng() % 20), 12 + static_cast<int>(rng() % 20));
    const Annotation a = random_annotation(rng, map);
    const auto erased = a.erased.to_bitmap();
    const std::set<std::int32_t> sel(a.selected.begin(), a.selected.end());
    const auto bits = compose_mask(map, a).to_bitmap();
    for (std::size_t k = 0; k < bits.size(); ++k) {
      CHECK((bits[k] != 0) == (sel.count(map.labels[k]) && !erased[k]));
    }
  }
}

TEST_CASE("compose is monotone in the selection and eraser-idempotent") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const SuperpixelMap map = random_map(rng, 24, 18);
    Annotation a = random_annotation(rng, map);
    const Mask before = compose_mask(map, a);
    Annotation more = a;
    more.selected.clear();
    for (int l = 0; l < map.n_labels; ++l) more.selected.push_back(l);
    CHECK(intersection_count(before, compose_mask(map, more)) == before.count());

    // erasing pixels already outside the mask changes nothing
    auto bits = before.to_bitmap();
    auto er = a.erased.to_bitmap();
    for (std::size_t k = 0; k < bits.size(); ++k) {
      if (!bits[k] && rng() % 2) er[k] = 1;
    }
    Annotation wider = a;
    wider.erased = Mask::from_bitmap(24, 18, er);
    CHECK(compose_mask(map, wider) == before);
  }
}

TEST_CASE("compose errors") {
  std::mt19937_64 rng(4);
  const SuperpixelMap map = random_map(rng, 16, 16);
  Annotation a = random_annotation(rng, map);
  Annotation stale = a;
  stale.superpixel_ref = "sha256:" + std::string(64, '0');
  CHECK_THROWS_AS(compose_mask(map, stale), StaleAnnotationError);
  Annotation out = a;
  out.selected.push_back(map.n_labels);
  CHECK_THROWS_AS(compose_mask(map, out), LabelOutOfRangeError);
  Annotation dims = a;
  dims.erased = Mask(16, 15);
  CHECK_THROWS_AS(compose_mask(map, dims), DimensionMismatchError);
}

TEST_CASE("iou") {
  std::mt19937_64 rng(5);
  CHECK(iou(Mask(6, 6), Mask(6, 6)) == 1.0);
  const Mask a = Mask::from_runs(10, 10, {{0, 0, 10}});
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, Mask::from_runs(10, 10, {{1, 0, 10}})) == 0.0);
  const Mask half = Mask::from_runs(10, 10, {{0, 0, 10}, {1, 0, 10}, {2, 0, 10}, {3, 0, 10}, {4, 0, 10}});
  const Mask all = Mask::from_runs(10, 10, [] {
    std::vector<Run> r;
    for (int y = 0; y < 10; ++y) r.push_back({y, 0, 10});
    return r;
  }());
  CHECK(iou(half, all) == 0.5);
  CHECK_THROWS_AS(iou(Mask(4, 4), Mask(5, 4)), DimensionMismatchError);

  for (int trial = 0; trial < 100; ++trial) {
    const Mask x = testing::random_mask(17, 11, rng, 0.3);
    const Mask y = testing::random_mask(17, 11, rng, 0.5);
    const auto bx = x.to_bitmap();
    const auto by = y.to_bitmap();
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t k = 0; k < bx.size(); ++k) {
      inter += bx[k] && by[k];
      uni += bx[k] || by[k];
    }
    const double expect = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    CHECK(iou(x, y) == expect);
    CHECK(iou(y, x) == iou(x, y));
    CHECK(iou(x, y) >= 0.0);
    CHECK(iou(x, y) <= 1.0);
  }
}

TEST_CASE("annotation save, load, save is byte-identical") {
  std::mt19937_64 rng(6);
  testing::TempDir dir("annot");
  for (int trial = 0; trial < 30; ++trial) {
    const SuperpixelMap map = random_map(rng, 20, 14);
    const Annotation a = random_annotation(rng, map);
    const std::string f1 = (dir / "a.json").string();
    const std::string f2 = (dir / "b.json").string();
    save_annotation(a, f1);
    const Annotation back = load_annotation(f1, &map);
    CHECK(back == a);
    save_annotation(back, f2);
    CHECK(read_text_file(f1) == read_text_file(f2));
  }
}

TEST_CASE("annotation JSON validation names the field") {
  std::mt19937_64 rng(7);
  const SuperpixelMap map = random_map(rng, 16, 12);
  const Annotation a = random_annotation(rng, map);
  auto path_of = [&](nlohmann::json j) {
    try {
      annotation_from_json(j, &map);
    } catch (const SchemaError& e) {
      return e.path();
    }
    return std::string();
  };
  nlohmann::json good = to_json(a);
  CHECK(path_of(good).empty());

  nlohmann::json bad = good;
  bad["selected"].push_back(map.n_labels);
  CHECK(path_of(bad).find("selected") != std::string::npos);
  bad = good;
  bad["timestamp"] = "yesterday";
  CHECK(path_of(bad) == "annotation.timestamp");
  bad = good;
  bad.erase("superpixel_ref");
  CHECK(path_of(bad) == "annotation.superpixel_ref");
  bad = good;
  bad["erased"]["width"] = 3;
  CHECK(path_of(bad).find("erased") != std::string::npos);

  // unsorted, repeated selections are canonicalized
  nlohmann::json messy = good;
  messy["selected"] = {2, 0, 2};
  const Annotation m = annotation_from_json(messy, &map);
  CHECK(m.selected == std::vector<std::int32_t>{0, 2});
}

TEST_CASE("brush strokes cover pixel centers within the radius") {
  const Mask dot = rasterize_strokes(9, 9, {{{{4.0, 4.0}}, 1.0}});
  CHECK(dot.count() == 5);
  const Mask line = rasterize_strokes(12, 5, {{{{1.0, 2.0}, {9.0, 2.0}}, 0.0}});
  CHECK(line.count() == 9);
  for (const Run& r : line.runs()) CHECK((r.row == 2 && r.start == 1 && r.length == 9));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Point a{u(rng), u(rng)};
    const Point b{u(rng), u(rng)};
    const double r = 0.5 + u(rng) / 5.0;
    const auto bits = rasterize_strokes(20, 20, {{{a, b}, r}}).to_bitmap();
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 20; ++x) {
        // distance to the segment by dense sampling, with slack for sampling error
        double best = 1e9;
        for (int s = 0; s <= 2000; ++s) {
          const double t = s / 2000.0;
          const double px = a.x + t * (b.x - a.x);
          const double py = a.y + t * (b.y - a.y);
          best = std::min(best, std::hypot(x - px, y - py));
        }
        const double seg = std::hypot(b.x - a.x, b.y - a.y) / 2000.0;
        if (best < r - seg) CHECK(bits[y * 20 + x] == 1);
        if (best > r + seg) CHECK(bits[y * 20 + x] == 0);
      }
    }
  }
}

TEST_CASE("timestamps") {
  CHECK(is_iso8601("2024-03-05T12:34:56Z"));
  CHECK(is_iso8601("2024-03-05T12:34:56.123+01:00"));
  CHECK(!is_iso8601("2024-03-05 12:34"));
  CHECK(is_iso8601(utc_timestamp()));
}

TEST_CASE("mask JSON round trip") {
  std::mt19937_64 rng(10);
  const Mask m = testing::random_mask(13, 7, rng);
  CHECK(mask_from_json(mask_to_json(m), "m") == m);
  auto j = mask_to_json(m);
  j["runs"].push_back({6, 12, 5});
  CHECK_THROWS_AS(mask_from_json(j, "m"), SchemaError);
}
