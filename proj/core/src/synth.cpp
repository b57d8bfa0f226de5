#include "lsw/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "lsw/catalog.hpp"
#include "lsw/rng.hpp"

namespace lsw {

namespace {

// Bilinear value noise in [-1,1] with the given lattice spacing.
std::vector<double> value_noise(std::size_t size, double scale, Rng& rng) {
  const std::size_t cells = (std::size_t)((double)(size - 1) / scale) + 1;
  const std::size_t points = cells + 1;
  std::vector<double> lattice(points * points);
  for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
  std::vector<double> out(size * size);
  for (std::size_t y = 0; y < size; ++y) {
    const double gy = (double)y / scale;
    const std::size_t j = (std::size_t)gy;
    double fy = gy - (double)j;
    fy = fy * fy * (3.0 - 2.0 * fy);
    for (std::size_t x = 0; x < size; ++x) {
      const double gx = (double)x / scale;
      const std::size_t i = (std::size_t)gx;
      double fx = gx - (double)i;
      fx = fx * fx * (3.0 - 2.0 * fx);
      const double v00 = lattice[j * points + i];
      const double v01 = lattice[j * points + i + 1];
      const double v10 = lattice[(j + 1) * points + i];
      const double v11 = lattice[(j + 1) * points + i + 1];
      out[y * size + x] = (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) +
                          (v10 * (1.0 - fx) + v11 * fx) * fy;
    }
  }
  return out;
}

// Terrain reflectance for all five bands, strictly positive.
std::vector<std::vector<float>> terrain_planes(std::size_t size, double texture_scale,
                                               std::uint64_t seed) {
  std::vector<std::vector<float>> planes;
  planes.reserve(kModelBands.size());
  for (std::size_t b = 0; b < kModelBands.size(); ++b) {
    Rng coarse_rng(derive_seed(seed, 2 * b));
    Rng fine_rng(derive_seed(seed, 2 * b + 1));
    const auto coarse = value_noise(size, texture_scale, coarse_rng);
    const auto fine = value_noise(size, texture_scale / 4.0, fine_rng);
    std::vector<float> plane(size * size);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      const double n = 0.7 * coarse[i] + 0.3 * fine[i];
      plane[i] = (float)((double)kBandBaseMean[b] + (double)kBandBaseAmp[b] * n);
    }
    planes.push_back(std::move(plane));
  }
  return planes;
}

// Per-pixel scar weight: 1 deep inside the rotated rectangle, linear 1-pixel
// falloff to 0 at the support edge.
std::vector<float> scar_weights(const ScarSpec& scar, std::size_t size) {
  const double th = scar.orientation_deg * std::numbers::pi / 180.0;
  const double ux = std::cos(th), uy = std::sin(th);
  const double hl = scar.length_px / 2.0 + 1.0;
  const double hw = scar.width_px / 2.0 + 1.0;
  std::vector<float> w(size * size, 0.0f);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = (double)x - scar.center_x;
      const double dy = (double)y - scar.center_y;
      const double du = std::abs(dx * ux + dy * uy);
      const double dv = std::abs(-dx * uy + dy * ux);
      const double v = std::min(hl - du, hw - dv);
      if (v > 0.0) w[y * size + x] = (float)std::min(v, 1.0);
    }
  }
  return w;
}

PixelRect mask_bbox(const std::vector<std::uint8_t>& mask, std::size_t size) {
  std::size_t x0 = size, y0 = size, x1 = 0, y1 = 0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      if (!mask[y * size + x]) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x0 > x1) throw ValidationError("scar mask is empty");
  return PixelRect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

RasterScene blank_scene(std::size_t size) {
  RasterScene scene;
  scene.width = (std::uint32_t)size;
  scene.height = (std::uint32_t)size;
  scene.band_ids.assign(kModelBands.begin(), kModelBands.end());
  scene.native_resolution_m.assign(kModelBands.size(), (std::uint16_t)kGridResolutionM);
  return scene;
}

void add_clouds(RasterScene& scene, double fraction, Rng& rng) {
  if (fraction <= 0.0) return;
  const std::size_t size = scene.width;
  std::vector<float> mask(size * size, 0.0f);
  std::size_t covered = 0;
  const std::size_t target = (std::size_t)(fraction * (double)(size * size));
  for (int iter = 0; iter < 200 && covered < target; ++iter) {
    const double cx = rng.uniform(0.0, (double)size);
    const double cy = rng.uniform(0.0, (double)size);
    const double r = rng.uniform((double)size / 12.0, (double)size / 6.0);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = (double)x - cx, dy = (double)y - cy;
        if (dx * dx + dy * dy > r * r) continue;
        auto& m = mask[y * size + x];
        if (m == 0.0f) {
          m = 1.0f;
          ++covered;
        }
      }
    }
  }
  for (auto& plane : scene.planes) {
    for (std::size_t i = 0; i < plane.size(); ++i) {
      if (mask[i] != 0.0f) plane[i] = kCloudReflectance;
    }
  }
  scene.cloud_mask = std::move(mask);
}

}  // namespace

void SceneSpec::validate() const {
  if (size < 8) {
    throw ValidationError("scene spec: size " + std::to_string(size) + " below minimum 8");
  }
  if (cloud_fraction < 0.0 || cloud_fraction > 1.0) {
    throw ValidationError("scene spec: cloud_fraction outside [0,1]");
  }
  if (illumination_delta < 0.7 || illumination_delta > 1.3) {
    throw ValidationError("scene spec: illumination_delta outside [0.7,1.3]");
  }
  if (texture_scale <= 1.0) {
    throw ValidationError("scene spec: texture_scale must exceed 1 pixel");
  }
  if (has_landslide) {
    if (scar.length_px <= 0.0 || scar.width_px <= 0.0) {
      throw ValidationError("scene spec: scar extents must be positive");
    }
    const double th = scar.orientation_deg * std::numbers::pi / 180.0;
    const double hl = scar.length_px / 2.0 + 1.0;
    const double hw = scar.width_px / 2.0 + 1.0;
    const double ex = hl * std::abs(std::cos(th)) + hw * std::abs(std::sin(th));
    const double ey = hl * std::abs(std::sin(th)) + hw * std::abs(std::cos(th));
    if (scar.center_x - ex < 0.0 || scar.center_x + ex > (double)size - 1.0 ||
        scar.center_y - ey < 0.0 || scar.center_y + ey > (double)size - 1.0) {
      throw ValidationError("scene spec: scar support extends outside the scene");
    }
  }
}

ScenePair generate_scene_pair(const SceneSpec& spec) {
  spec.validate();
  const auto terrain = terrain_planes(spec.size, spec.texture_scale, spec.seed);

  ScenePair out;
  out.before = blank_scene(spec.size);
  out.before.timestamp = 0;
  out.before.planes = terrain;

  out.after = blank_scene(spec.size);
  out.after.timestamp = 5 * 86400;  // one revisit later
  out.after.planes = terrain;

  out.truth.label = spec.has_landslide ? 1 : 0;
  if (spec.has_landslide) {
    const auto w = scar_weights(spec.scar, spec.size);
    out.truth.scar_mask.assign(spec.size * spec.size, 0);
    for (std::size_t i = 0; i < w.size(); ++i) out.truth.scar_mask[i] = w[i] > 0.0f;
    out.truth.scar_bbox = mask_bbox(out.truth.scar_mask, spec.size);
    for (std::size_t b = 0; b < kModelBands.size(); ++b) {
      auto& plane = out.after.planes[b];
      for (std::size_t i = 0; i < plane.size(); ++i) {
        plane[i] += spec.scar.band_delta[b] * w[i];
      }
    }
  }
  if (spec.illumination_delta != 1.0) {
    for (auto& plane : out.after.planes) {
      for (auto& v : plane) v = (float)((double)v * spec.illumination_delta);
    }
  }
  Rng cloud_rng(derive_seed(spec.seed, 0xC10Dul));
  add_clouds(out.after, spec.cloud_fraction, cloud_rng);
  return out;
}

DatasetLayout generate_dataset(const std::filesystem::path& dir, std::size_t n_positive,
                               std::size_t n_negative, std::size_t size,
                               std::uint64_t master_seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());

  DatasetLayout layout;
  layout.catalog_file = dir / "catalog.csv";
  layout.truth_file = dir / "truth.csv";

  std::vector<CatalogEntry> catalog;
  std::string truth = "site_id;label;bbox_x;bbox_y;bbox_w;bbox_h\n";

  const std::int64_t base_days = days_from_civil(Date{2017, 3, 1});
  const std::size_t total = n_positive + n_negative;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const bool positive = idx < n_positive;
    const std::uint64_t site_seed = derive_seed(master_seed, idx);
    char name[32];
    std::snprintf(name, sizeof name, "site_%03zu", idx);
    const std::filesystem::path site_dir = dir / name;
    std::filesystem::create_directories(site_dir, ec);
    if (ec) throw IoError(site_dir.string() + ": cannot create directory: " + ec.message());

    SceneSpec spec;
    spec.size = size;
    spec.seed = site_seed;
    spec.has_landslide = positive;
    if (positive) {
      Rng scar_rng(derive_seed(site_seed, 100));
      spec.scar.center_x = (double)size * scar_rng.uniform(0.36, 0.64);
      spec.scar.center_y = (double)size * scar_rng.uniform(0.36, 0.64);
      spec.scar.length_px = (double)size * scar_rng.uniform(0.26, 0.38);
      spec.scar.width_px = (double)size * scar_rng.uniform(0.09, 0.14);
      spec.scar.orientation_deg = scar_rng.uniform(0.0, 180.0);
    }

    const auto terrain = terrain_planes(size, spec.texture_scale, site_seed);
    GroundTruth site_truth;
    site_truth.label = positive ? 1 : 0;
    std::vector<float> scar_w;
    if (positive) {
      scar_w = scar_weights(spec.scar, size);
      site_truth.scar_mask.assign(size * size, 0);
      for (std::size_t i = 0; i < scar_w.size(); ++i) site_truth.scar_mask[i] = scar_w[i] > 0.0f;
      site_truth.scar_bbox = mask_bbox(site_truth.scar_mask, size);
    }

    Rng illum_rng(derive_seed(site_seed, 200));
    const std::array<double, 3> illum = {1.0, illum_rng.uniform(0.95, 1.05),
                                         illum_rng.uniform(0.95, 1.05)};
    const double g0 = -120.0 + (double)idx * 0.05;
    const double g3 = 35.0 + (double)idx * 0.03;
    for (std::size_t k = 0; k < 3; ++k) {
      RasterScene scene = blank_scene(size);
      scene.timestamp = (base_days + (std::int64_t)idx * 20 + (std::int64_t)k * 5) * 86400 + 37800;
      scene.geo_transform = {g0, 1e-4, 0.0, g3, 0.0, -1e-4};
      scene.planes = terrain;
      if (positive && k == 2) {
        for (std::size_t b = 0; b < kModelBands.size(); ++b) {
          auto& plane = scene.planes[b];
          for (std::size_t i = 0; i < plane.size(); ++i) {
            plane[i] += spec.scar.band_delta[b] * scar_w[i];
          }
        }
      }
      if (illum[k] != 1.0) {
        for (auto& plane : scene.planes) {
          for (auto& v : plane) v = (float)((double)v * illum[k]);
        }
      }
      char scene_name[32];
      std::snprintf(scene_name, sizeof scene_name, "scene_%zu.lsrs", k);
      save_raster(scene, site_dir / scene_name);
    }

    truth += name;
    truth += ';';
    truth += positive ? '1' : '0';
    if (positive) {
      const auto& r = site_truth.scar_bbox;
      for (std::size_t v : {r.x, r.y, r.w, r.h}) {
        truth += ';';
        truth += std::to_string(v);
      }
    } else {
      truth += ";;;;";
    }
    truth += '\n';

    if (positive) {
      Rng weather_rng(derive_seed(site_seed, 300));
      CatalogEntry entry;
      entry.location_name = name;
      entry.event_date = civil_from_days(base_days + (std::int64_t)idx * 20 + 10);
      entry.size_class = SizeClass::very_large;
      entry.event_type = "landslide";
      entry.longitude = g0 + spec.scar.center_x * 1e-4;
      entry.latitude = g3 - spec.scar.center_y * 1e-4;
      entry.accuracy_km = 0.15;
      entry.rainfall_mm = std::round(weather_rng.uniform(50.0, 300.0) * 10.0) / 10.0;
      entry.humidity_pct = std::round(weather_rng.uniform(60.0, 95.0));
      entry.cloud_cover_pct = std::round(weather_rng.uniform(0.0, 20.0));
      catalog.push_back(std::move(entry));
    }
    layout.site_ids.push_back(name);
  }

  std::ofstream cf(layout.catalog_file, std::ios::binary | std::ios::trunc);
  if (!cf) throw IoError(layout.catalog_file.string() + ": cannot open for write");
  cf << serialize_catalog(catalog);
  if (!cf) throw IoError(layout.catalog_file.string() + ": write failed");

  std::ofstream tf(layout.truth_file, std::ios::binary | std::ios::trunc);
  if (!tf) throw IoError(layout.truth_file.string() + ": cannot open for write");
  tf << truth;
  if (!tf) throw IoError(layout.truth_file.string() + ": write failed");
  return layout;
}

int heuristic_label(const TilePair& pair) {
  validate_tile_pair(pair);
  std::size_t band = pair.before.band_ids.size();
  for (std::size_t b = 0; b < pair.before.band_ids.size(); ++b) {
    if (pair.before.band_ids[b] == 12) band = b;
  }
  if (band == pair.before.band_ids.size()) {
    throw ValidationError("heuristic: pair has no band 12");
  }
  const std::size_t w = pair.before.width, h = pair.before.height;
  PixelRect box{w / 3, h / 3, std::max<std::size_t>(1, w / 3), std::max<std::size_t>(1, h / 3)};
  if (pair.landslide_bbox) box = *pair.landslide_bbox;

  const auto& before = pair.before.planes[band];
  const auto& after = pair.after.planes[band];
  double inside_sum = 0.0, outside_sum = 0.0;
  std::size_t inside_n = 0, outside_n = 0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double d = std::abs((double)after[y * w + x] - (double)before[y * w + x]);
      const bool in = x >= box.x && x < box.x + box.w && y >= box.y && y < box.y + box.h;
      if (in) {
        inside_sum += d;
        ++inside_n;
      } else {
        outside_sum += d;
        ++outside_n;
      }
    }
  }
  const double inside = inside_n ? inside_sum / (double)inside_n : 0.0;
  const double outside = outside_n ? outside_sum / (double)outside_n : 0.0;
  return inside >= kHeuristicRatio * outside && inside >= kHeuristicFloor ? 1 : 0;
}

}  // namespace lsw
