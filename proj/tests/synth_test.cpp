#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "lsw/catalog.hpp"
#include "lsw/errors.hpp"
#include "lsw/synth.hpp"
#include "lsw/train.hpp"

using namespace lsw;

namespace {

SceneSpec landslide_spec(std::size_t size, std::uint64_t seed) {
  SceneSpec spec;
  spec.size = size;
  spec.seed = seed;
  spec.has_landslide = true;
  spec.scar.center_x = (double)size / 2.0;
  spec.scar.center_y = (double)size / 2.0;
  spec.scar.length_px = (double)size * 0.3;
  spec.scar.width_px = (double)size * 0.12;
  spec.scar.orientation_deg = 30.0;
  return spec;
}

bool planes_equal(const RasterScene& a, const RasterScene& b) {
  if (a.planes.size() != b.planes.size()) return false;
  for (std::size_t i = 0; i < a.planes.size(); ++i) {
    if (a.planes[i].size() != b.planes[i].size()) return false;
    if (std::memcmp(a.planes[i].data(), b.planes[i].data(),
                    a.planes[i].size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

// Mean signed difference on the scar and mean absolute difference off it.
std::pair<double, double> scar_contrast(const ScenePair& pair, std::size_t band_idx) {
  const auto& before = pair.before.planes[band_idx];
  const auto& after = pair.after.planes[band_idx];
  double on_sum = 0.0, off_sum = 0.0;
  std::size_t on_n = 0, off_n = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double d = (double)after[i] - (double)before[i];
    if (pair.truth.scar_mask[i]) {
      on_sum += d;
      ++on_n;
    } else {
      off_sum += std::abs(d);
      ++off_n;
    }
  }
  REQUIRE(on_n > 0);
  REQUIRE(off_n > 0);
  return {on_sum / (double)on_n, off_sum / (double)off_n};
}

TilePair whole_scene_pair(const RasterScene& s0, const RasterScene& s1, int label,
                          std::optional<PixelRect> bbox, std::string site) {
  TilePair pair;
  pair.before = select_bands(s0, kModelBands);
  pair.after = select_bands(s1, kModelBands);
  pair.before_timestamp = s0.timestamp;
  pair.after_timestamp = s1.timestamp;
  pair.label = label;
  pair.landslide_bbox = std::move(bbox);
  pair.source_site = std::move(site);
  return pair;
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    REQUIRE(f.good());
    files[std::filesystem::relative(e.path(), root).generic_string()] =
        std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }
  return files;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("identity spec leaves the after image untouched") {
  SceneSpec spec;
  spec.size = 32;
  spec.seed = 4;
  const auto pair = generate_scene_pair(spec);
  CHECK(planes_equal(pair.before, pair.after));
  CHECK(pair.before.timestamp < pair.after.timestamp);
  CHECK(pair.truth.label == 0);
  CHECK(pair.truth.scar_mask.empty());
  CHECK(pair.after.cloud_mask.empty());
  CHECK(pair.before.band_ids.size() == 5);
}

TEST_CASE("scar moves bands the way bare ground does") {
  auto spec = landslide_spec(64, 21);
  for (double illum : {1.0, 1.05}) {
    spec.illumination_delta = illum;
    const auto pair = generate_scene_pair(spec);
    REQUIRE(pair.truth.label == 1);

    const auto [nir_on, nir_off] = scar_contrast(pair, 3);   // band 8
    const auto [swir_on, swir_off] = scar_contrast(pair, 4); // band 12
    CHECK(nir_on < 0.0);
    CHECK(swir_on > 0.0);
    CHECK(std::abs(nir_on) > 5.0 * nir_off);
    CHECK(std::abs(swir_on) > 5.0 * swir_off);
  }
}

TEST_CASE("scar weights follow the rectangle plus falloff geometry") {
  SceneSpec spec;
  spec.size = 64;
  spec.seed = 77;
  spec.has_landslide = true;
  spec.scar.center_x = 32.0;
  spec.scar.center_y = 32.0;
  spec.scar.length_px = 21.0;
  spec.scar.width_px = 9.0;
  spec.scar.orientation_deg = 0.0;
  const auto pair = generate_scene_pair(spec);

  // Support: |x-32| < 11.5, |y-32| < 5.5 for axis-aligned orientation.
  CHECK((pair.truth.scar_bbox == PixelRect{21, 27, 23, 11}));

  const std::size_t center = 32 * 64 + 32;
  const std::size_t edge = 32 * 64 + 43;  // du = 11, weight 0.5
  for (std::size_t b = 0; b < 5; ++b) {
    const float before = pair.before.planes[b][center];
    const float after = pair.after.planes[b][center];
    CHECK(after - before == doctest::Approx(kScarBandDelta[b]).epsilon(1e-5));
    const float edge_delta = pair.after.planes[b][edge] - pair.before.planes[b][edge];
    CHECK(edge_delta == doctest::Approx(0.5f * kScarBandDelta[b]).epsilon(1e-5));
  }
}

TEST_CASE("truth bbox is the tight bound of the scar mask") {
  const auto pair = generate_scene_pair(landslide_spec(48, 3));
  const auto& mask = pair.truth.scar_mask;
  REQUIRE(mask.size() == 48 * 48);
  std::size_t x0 = 48, y0 = 48, x1 = 0, y1 = 0;
  for (std::size_t y = 0; y < 48; ++y) {
    for (std::size_t x = 0; x < 48; ++x) {
      if (!mask[y * 48 + x]) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  REQUIRE(x0 <= x1);
  CHECK((pair.truth.scar_bbox == PixelRect{x0, y0, x1 - x0 + 1, y1 - y0 + 1}));
}

TEST_CASE("same spec generates bit-identical pairs") {
  auto spec = landslide_spec(40, 9);
  spec.illumination_delta = 1.03;
  spec.cloud_fraction = 0.2;
  const auto a = generate_scene_pair(spec);
  const auto b = generate_scene_pair(spec);
  CHECK(planes_equal(a.before, b.before));
  CHECK(planes_equal(a.after, b.after));
  CHECK(a.truth.scar_mask == b.truth.scar_mask);
  CHECK(a.truth.scar_bbox == b.truth.scar_bbox);
  CHECK(a.after.cloud_mask == b.after.cloud_mask);

  spec.seed = 10;
  const auto c = generate_scene_pair(spec);
  CHECK_FALSE(planes_equal(a.before, c.before));
}

TEST_CASE("scene spec rejects out-of-range knobs") {
  SceneSpec spec;
  spec.size = 32;

  auto bad = spec;
  bad.cloud_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.cloud_fraction = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = spec;
  bad.illumination_delta = 0.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.illumination_delta = 1.35;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = spec;
  bad.texture_scale = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = spec;
  bad.size = 4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = landslide_spec(32, 0);
  bad.scar.center_x = 2.0;  // support would cross the left edge
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = landslide_spec(32, 0);
  bad.scar.width_px = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("clouds overwrite pixels and set the mask plane") {
  SceneSpec spec;
  spec.size = 48;
  spec.seed = 15;
  spec.cloud_fraction = 0.4;
  const auto pair = generate_scene_pair(spec);
  REQUIRE(pair.after.cloud_mask.size() == 48 * 48);
  CHECK(pair.before.cloud_mask.empty());

  std::size_t covered = 0;
  for (std::size_t i = 0; i < pair.after.cloud_mask.size(); ++i) {
    const float m = pair.after.cloud_mask[i];
    REQUIRE((m == 0.0f || m == 1.0f));
    if (m == 1.0f) {
      ++covered;
      for (const auto& plane : pair.after.planes) CHECK(plane[i] == kCloudReflectance);
    }
  }
  const double frac = (double)covered / (double)pair.after.cloud_mask.size();
  CHECK(frac > 0.3);
  CHECK(pair.after.cloud_fraction(0, 0, 48, 48) == doctest::Approx(frac));
}

TEST_CASE("illumination-only negatives scale every band uniformly") {
  SceneSpec spec;
  spec.size = 32;
  spec.seed = 8;
  spec.illumination_delta = 1.05;
  const auto pair = generate_scene_pair(spec);
  for (std::size_t b = 0; b < 5; ++b) {
    const auto& before = pair.before.planes[b];
    const auto& after = pair.after.planes[b];
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double r = (double)after[i] / (double)before[i];
      sum += r;
      sq += r * r;
    }
    const double n = (double)before.size();
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    CHECK(mean == doctest::Approx(1.05).epsilon(1e-6));
    CHECK(std::sqrt(var) / mean < 1e-6);
  }
}

TEST_CASE("dataset writes the advertised layout") {
  const auto dir = scratch_dir("synth_layout");
  const auto layout = generate_dataset(dir, 3, 2, 32, 99);

  REQUIRE(layout.site_ids.size() == 5);
  CHECK(layout.site_ids[0] == "site_000");
  CHECK(layout.site_ids[4] == "site_004");

  std::ifstream cf(layout.catalog_file);
  REQUIRE(cf.good());
  std::string catalog_text((std::istreambuf_iterator<char>(cf)),
                           std::istreambuf_iterator<char>());
  const auto parsed = parse_catalog(catalog_text);
  CHECK(parsed.diagnostics.empty());
  REQUIRE(parsed.entries.size() == 3);  // catalog rows exist for positives only
  for (const auto& e : parsed.entries) {
    CHECK(e.size_class == SizeClass::very_large);
    CHECK(e.event_type == "landslide");
  }

  std::ifstream tf(layout.truth_file);
  REQUIRE(tf.good());
  std::string line;
  std::getline(tf, line);
  CHECK(line == "site_id;label;bbox_x;bbox_y;bbox_w;bbox_h");
  std::size_t rows = 0, with_bbox = 0;
  while (std::getline(tf, line)) {
    if (line.empty()) continue;
    ++rows;
    if (line.find(";;;;") == std::string::npos) ++with_bbox;
  }
  CHECK(rows == 5);
  CHECK(with_bbox == 3);

  for (const auto& site : layout.site_ids) {
    std::int64_t last_ts = -1;
    for (int k = 0; k < 3; ++k) {
      const auto scene =
          load_raster(dir / site / ("scene_" + std::to_string(k) + ".lsrs"));
      CHECK(scene.width == 32);
      CHECK(scene.band_ids.size() == 5);
      CHECK(scene.timestamp > last_ts);
      last_ts = scene.timestamp;
    }
  }
}

TEST_CASE("catalog points land inside the truth bbox") {
  const auto dir = scratch_dir("synth_geo");
  const auto layout = generate_dataset(dir, 2, 0, 48, 1234);

  std::ifstream cf(layout.catalog_file);
  std::string catalog_text((std::istreambuf_iterator<char>(cf)),
                           std::istreambuf_iterator<char>());
  const auto parsed = parse_catalog(catalog_text);
  REQUIRE(parsed.entries.size() == 2);

  const auto sites = load_sites(dir);
  REQUIRE(sites.size() == 2);
  for (const auto& entry : parsed.entries) {
    const SiteData* site = nullptr;
    for (const auto& s : sites) {
      if (s.site_id == entry.location_name) site = &s;
    }
    REQUIRE(site != nullptr);
    const auto& gt = site->scenes[0].geo_transform;
    const double px = (entry.longitude - gt[0]) / gt[1];
    const double py = (entry.latitude - gt[3]) / gt[5];
    CHECK(px >= (double)site->bbox.x);
    CHECK(px < (double)(site->bbox.x + site->bbox.w));
    CHECK(py >= (double)site->bbox.y);
    CHECK(py < (double)(site->bbox.y + site->bbox.h));
  }
}

TEST_CASE("empty dataset writes headers and nothing else") {
  const auto dir = scratch_dir("synth_empty");
  const auto layout = generate_dataset(dir, 0, 0, 32, 5);
  CHECK(layout.site_ids.empty());

  std::ifstream cf(layout.catalog_file);
  std::string catalog_text((std::istreambuf_iterator<char>(cf)),
                           std::istreambuf_iterator<char>());
  const auto parsed = parse_catalog(catalog_text);
  CHECK(parsed.entries.empty());

  std::size_t dirs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_directory()) ++dirs;
  }
  CHECK(dirs == 0);
}

TEST_CASE("dataset generation is deterministic byte for byte") {
  const auto dir_a = scratch_dir("synth_det_a");
  const auto dir_b = scratch_dir("synth_det_b");
  const auto dir_c = scratch_dir("synth_det_c");
  generate_dataset(dir_a, 2, 1, 24, 77);
  generate_dataset(dir_b, 2, 1, 24, 77);
  generate_dataset(dir_c, 2, 1, 24, 78);

  const auto tree_a = read_tree(dir_a);
  const auto tree_b = read_tree(dir_b);
  CHECK(tree_a == tree_b);

  const auto tree_c = read_tree(dir_c);
  REQUIRE(tree_a.size() == tree_c.size());
  bool any_differs = false;
  for (const auto& [path, bytes] : tree_a) {
    if (tree_c.at(path) != bytes) any_differs = true;
  }
  CHECK(any_differs);
}

TEST_CASE("band-12 heuristic separates generated sites perfectly") {
  const auto dir = scratch_dir("synth_heuristic");
  generate_dataset(dir, 4, 4, 32, 2026);
  const auto sites = load_sites(dir);
  REQUIRE(sites.size() == 8);

  ConfusionCounts counts;
  for (const auto& site : sites) {
    REQUIRE(site.scenes.size() == 3);
    const auto& first = site.scenes.front();
    const auto& last = site.scenes.back();
    TilePair probe;
    if (site.label == 1) {
      probe = whole_scene_pair(first, last, 1, site.bbox, site.site_id);
    } else {
      probe = whole_scene_pair(first, last, 0, std::nullopt, site.site_id);
    }
    const int called = heuristic_label(probe);
    if (site.label == 1) {
      (called == 1 ? counts.tp : counts.fn) += 1;
    } else {
      (called == 0 ? counts.tn : counts.fp) += 1;
    }
  }
  CHECK(balanced_accuracy(counts) == 1.0);
}

TEST_CASE("heuristic needs band 12") {
  const auto gen = generate_scene_pair(landslide_spec(32, 6));
  auto probe = whole_scene_pair(gen.before, gen.after, 1, gen.truth.scar_bbox, "s");
  const std::array<std::uint8_t, 3> rgb{2, 3, 4};
  probe.before = select_bands(gen.before, rgb);
  probe.after = select_bands(gen.after, rgb);
  CHECK_THROWS_AS(heuristic_label(probe), ValidationError);
}

}  // TEST_SUITE
