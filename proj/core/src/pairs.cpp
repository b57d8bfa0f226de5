#include "lsw/pairs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lsw {

namespace {

constexpr int kCloudRetries = 100;

void check_transform_id(DihedralTransform t) {
  if (t.id < 0 || t.id >= kDihedralOrder) {
    throw ValidationError("dihedral transform id " + std::to_string(t.id) +
                          " outside 0..7");
  }
}

std::vector<float> rot90_ccw(const std::vector<float>& src, std::size_t n) {
  std::vector<float> dst(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dst[i * n + j] = src[(n - 1 - j) * n + i];
    }
  }
  return dst;
}

std::vector<float> flip_h(const std::vector<float>& src, std::size_t n) {
  std::vector<float> dst(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dst[i * n + j] = src[i * n + (n - 1 - j)];
    }
  }
  return dst;
}

std::array<std::array<int, 8>, 8> build_compose_table() {
  // Derived by acting on a marker grid rather than trusting group algebra.
  constexpr std::size_t n = 4;
  std::vector<float> base(n * n);
  std::iota(base.begin(), base.end(), 0.0f);
  std::array<std::vector<float>, 8> images;
  for (int t = 0; t < 8; ++t) images[(std::size_t)t] = apply_dihedral(base, n, {t});
  std::array<std::array<int, 8>, 8> table{};
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      const auto ab = apply_dihedral(images[(std::size_t)a], n, {b});
      for (int c = 0; c < 8; ++c) {
        if (images[(std::size_t)c] == ab) {
          table[(std::size_t)a][(std::size_t)b] = c;
          break;
        }
      }
    }
  }
  return table;
}

}  // namespace

void validate_tile_pair(const TilePair& pair) {
  const auto& b = pair.before;
  const auto& a = pair.after;
  if (b.width != a.width || b.height != a.height) {
    throw ValidationError("tile pair: before and after tile sizes differ");
  }
  if (b.band_ids != a.band_ids) {
    throw ValidationError("tile pair: before and after band orders differ");
  }
  if (b.planes.size() != b.band_ids.size() || a.planes.size() != a.band_ids.size()) {
    throw ValidationError("tile pair: plane count does not match band list");
  }
  const std::size_t px = b.width * b.height;
  for (const auto& stack : {b, a}) {
    for (const auto& plane : stack.planes) {
      if (plane.size() != px) {
        throw ValidationError("tile pair: plane size does not match tile extent");
      }
    }
  }
  if (pair.before_timestamp >= pair.after_timestamp) {
    throw ValidationError("tile pair: before timestamp " +
                          std::to_string(pair.before_timestamp) +
                          " is not earlier than after timestamp " +
                          std::to_string(pair.after_timestamp));
  }
  if (pair.label != 0 && pair.label != 1) {
    throw ValidationError("tile pair: label " + std::to_string(pair.label) +
                          " is not 0 or 1");
  }
  if (pair.label == 1) {
    if (!pair.landslide_bbox) {
      throw ValidationError("tile pair: positive pair without a bbox");
    }
    const auto& r = *pair.landslide_bbox;
    if (r.w == 0 || r.h == 0 || r.x + r.w > b.width || r.y + r.h > b.height) {
      throw ValidationError("tile pair: bbox exceeds tile bounds");
    }
  } else if (pair.landslide_bbox) {
    throw ValidationError("tile pair: negative pair carries a bbox");
  }
}

DihedralTransform compose(DihedralTransform first, DihedralTransform second) {
  check_transform_id(first);
  check_transform_id(second);
  static const auto table = build_compose_table();
  return {table[(std::size_t)first.id][(std::size_t)second.id]};
}

DihedralTransform inverse(DihedralTransform t) {
  check_transform_id(t);
  for (int c = 0; c < kDihedralOrder; ++c) {
    if (compose(t, {c}).id == 0) return {c};
  }
  throw ValidationError("dihedral transform has no inverse, table corrupt");
}

std::vector<float> apply_dihedral(const std::vector<float>& plane, std::size_t n,
                                  DihedralTransform t) {
  check_transform_id(t);
  if (plane.size() != n * n) {
    throw ValidationError("dihedral transform: plane is not " + std::to_string(n) + "x" +
                          std::to_string(n));
  }
  std::vector<float> out = plane;
  for (int r = 0; r < (t.id & 3); ++r) out = rot90_ccw(out, n);
  if (t.id >= 4) out = flip_h(out, n);
  return out;
}

PixelRect apply_dihedral(const PixelRect& rect, std::size_t n, DihedralTransform t) {
  check_transform_id(t);
  PixelRect r = rect;
  for (int i = 0; i < (t.id & 3); ++i) {
    r = PixelRect{n - r.y - r.h, r.x, r.h, r.w};
  }
  if (t.id >= 4) r.x = n - r.x - r.w;
  return r;
}

TilePair dihedral_augment(const TilePair& pair, DihedralTransform t) {
  check_transform_id(t);
  if (pair.before.width != pair.before.height) {
    throw ValidationError("dihedral_augment: tiles must be square, got " +
                          std::to_string(pair.before.width) + "x" +
                          std::to_string(pair.before.height));
  }
  TilePair out = pair;
  const std::size_t n = pair.before.width;
  for (auto* stack : {&out.before, &out.after}) {
    for (auto& plane : stack->planes) plane = apply_dihedral(plane, n, t);
  }
  if (out.landslide_bbox) {
    out.landslide_bbox = apply_dihedral(*out.landslide_bbox, n, t);
  }
  return out;
}

namespace {

void check_congruent(const RasterScene& a, const RasterScene& b) {
  if (a.width != b.width || a.height != b.height || a.band_ids != b.band_ids) {
    throw ValidationError("scenes not congruent: " + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height) + " or band lists differ");
  }
}

BandStack cut_window(const RasterScene& scene, std::size_t ox, std::size_t oy,
                     std::size_t tile) {
  BandStack stack;
  stack.width = tile;
  stack.height = tile;
  stack.band_ids = scene.band_ids;
  stack.planes.reserve(scene.planes.size());
  for (const auto& plane : scene.planes) {
    std::vector<float> window(tile * tile);
    for (std::size_t y = 0; y < tile; ++y) {
      const float* src = plane.data() + (oy + y) * scene.width + ox;
      std::copy(src, src + tile, window.data() + y * tile);
    }
    stack.planes.push_back(std::move(window));
  }
  return stack;
}

bool window_cloudy(const RasterScene& a, const RasterScene& b, std::size_t ox,
                   std::size_t oy, std::size_t tile) {
  return a.cloud_fraction(ox, oy, tile, tile) > kMaxCloudFraction ||
         b.cloud_fraction(ox, oy, tile, tile) > kMaxCloudFraction;
}

}  // namespace

TilePair sample_window(const RasterScene& before, const RasterScene& after,
                       const PixelRect& bbox, std::size_t tile, std::uint64_t rng_seed,
                       std::string source_site) {
  check_congruent(before, after);
  if (before.timestamp >= after.timestamp) {
    throw ValidationError("sample_window: before scene is not earlier than after scene");
  }
  if (bbox.w == 0 || bbox.h == 0) {
    throw ValidationError("sample_window: empty bbox");
  }
  if (bbox.w > tile || bbox.h > tile) {
    throw ValidationError("sample_window: bbox " + std::to_string(bbox.w) + "x" +
                          std::to_string(bbox.h) + " larger than tile " +
                          std::to_string(tile));
  }
  if (tile == 0 || tile > before.width || tile > before.height) {
    throw ValidationError("sample_window: tile " + std::to_string(tile) +
                          " does not fit scene " + std::to_string(before.width) + "x" +
                          std::to_string(before.height));
  }
  if (bbox.x + bbox.w > before.width || bbox.y + bbox.h > before.height) {
    throw ValidationError("sample_window: bbox exceeds scene bounds");
  }

  // All offsets whose tile fully contains the bbox.
  const std::size_t lo_x = bbox.x + bbox.w > tile ? bbox.x + bbox.w - tile : 0;
  const std::size_t hi_x = std::min(bbox.x, (std::size_t)before.width - tile);
  const std::size_t lo_y = bbox.y + bbox.h > tile ? bbox.y + bbox.h - tile : 0;
  const std::size_t hi_y = std::min(bbox.y, (std::size_t)before.height - tile);

  Rng rng(rng_seed);
  std::size_t ox = 0, oy = 0;
  bool placed = false;
  for (int attempt = 0; attempt < kCloudRetries; ++attempt) {
    ox = lo_x + rng.uniform_below(hi_x - lo_x + 1);
    oy = lo_y + rng.uniform_below(hi_y - lo_y + 1);
    if (!window_cloudy(before, after, ox, oy, tile)) {
      placed = true;
      break;
    }
  }
  if (!placed) {
    throw ValidationError("sample_window: no window under " +
                          std::to_string((int)(kMaxCloudFraction * 100)) +
                          "% cloud after " + std::to_string(kCloudRetries) + " tries");
  }

  TilePair pair;
  pair.before = cut_window(before, ox, oy, tile);
  pair.after = cut_window(after, ox, oy, tile);
  pair.before_timestamp = before.timestamp;
  pair.after_timestamp = after.timestamp;
  pair.label = 1;
  pair.landslide_bbox = PixelRect{bbox.x - ox, bbox.y - oy, bbox.w, bbox.h};
  pair.source_site = std::move(source_site);
  validate_tile_pair(pair);
  return pair;
}

std::vector<TilePair> build_negative_pairs(std::span<const RasterScene> scenes,
                                           std::size_t tile, std::size_t count,
                                           std::uint64_t rng_seed, std::string source_site) {
  if (scenes.size() < 2) {
    throw ValidationError("build_negative_pairs: need at least 2 pre-event scenes, got " +
                          std::to_string(scenes.size()));
  }
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scenes[a].timestamp < scenes[b].timestamp;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    check_congruent(scenes[order[0]], scenes[order[i]]);
    if (scenes[order[i - 1]].timestamp == scenes[order[i]].timestamp) {
      throw ValidationError("build_negative_pairs: duplicate scene timestamp " +
                            std::to_string(scenes[order[i]].timestamp));
    }
  }
  if (tile == 0 || tile > scenes[0].width || tile > scenes[0].height) {
    throw ValidationError("build_negative_pairs: tile " + std::to_string(tile) +
                          " does not fit scene " + std::to_string(scenes[0].width) + "x" +
                          std::to_string(scenes[0].height));
  }

  const std::size_t n = order.size();
  const std::size_t pairings = n * (n - 1) / 2;
  Rng rng(rng_seed);
  std::vector<TilePair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Uniform over unordered pairs, then time-ordered.
    std::size_t idx = rng.uniform_below(pairings);
    std::size_t a = 0;
    while (idx >= n - 1 - a) {
      idx -= n - 1 - a;
      ++a;
    }
    const std::size_t b = a + 1 + idx;
    const RasterScene& earlier = scenes[order[a]];
    const RasterScene& later = scenes[order[b]];

    std::size_t ox = 0, oy = 0;
    bool placed = false;
    for (int attempt = 0; attempt < kCloudRetries; ++attempt) {
      ox = rng.uniform_below(earlier.width - tile + 1);
      oy = rng.uniform_below(earlier.height - tile + 1);
      if (!window_cloudy(earlier, later, ox, oy, tile)) {
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw ValidationError("build_negative_pairs: no window under cloud threshold after " +
                            std::to_string(kCloudRetries) + " tries");
    }

    TilePair pair;
    pair.before = cut_window(earlier, ox, oy, tile);
    pair.after = cut_window(later, ox, oy, tile);
    pair.before_timestamp = earlier.timestamp;
    pair.after_timestamp = later.timestamp;
    pair.label = 0;
    pair.source_site = source_site;
    validate_tile_pair(pair);
    out.push_back(std::move(pair));
  }
  return out;
}

PixelRect bbox_from_catalog(const CatalogEntry& entry, const RasterScene& scene) {
  if (!entry.accuracy_km) {
    throw ValidationError("bbox_from_catalog: entry '" + entry.location_name +
                          "' has no location accuracy");
  }
  const auto& g = scene.geo_transform;
  const double det = g[1] * g[5] - g[2] * g[4];
  if (std::abs(det) < 1e-12) {
    throw ValidationError("bbox_from_catalog: degenerate geo transform");
  }
  const double dx = entry.longitude - g[0];
  const double dy = entry.latitude - g[3];
  const double px = (dx * g[5] - g[2] * dy) / det;
  const double py = (g[1] * dy - g[4] * dx) / det;
  const auto cx = (long long)std::llround(px);
  const auto cy = (long long)std::llround(py);
  if (cx < 0 || cy < 0 || cx >= (long long)scene.width || cy >= (long long)scene.height) {
    throw ValidationError("bbox_from_catalog: point for '" + entry.location_name +
                          "' falls outside the scene");
  }
  const long long side =
      std::max(1ll, std::llround(2.0 * *entry.accuracy_km * 1000.0 / kGridResolutionM));
  long long x0 = cx - side / 2;
  long long y0 = cy - side / 2;
  x0 = std::clamp(x0, 0ll, (long long)scene.width - 1);
  y0 = std::clamp(y0, 0ll, (long long)scene.height - 1);
  const long long w = std::min(side, (long long)scene.width - x0);
  const long long h = std::min(side, (long long)scene.height - y0);
  return PixelRect{(std::size_t)x0, (std::size_t)y0, (std::size_t)w, (std::size_t)h};
}

namespace {

constexpr std::string_view kPairsHeader =
    "site;label;before_file;after_file;bbox_x;bbox_y;bbox_w;bbox_h";

RasterScene stack_to_scene(const BandStack& stack, std::int64_t timestamp) {
  RasterScene scene;
  scene.width = (std::uint32_t)stack.width;
  scene.height = (std::uint32_t)stack.height;
  scene.band_ids = stack.band_ids;
  scene.native_resolution_m.assign(stack.band_ids.size(), kGridResolutionM);
  scene.timestamp = timestamp;
  scene.planes = stack.planes;
  return scene;
}

}  // namespace

void save_pair_dataset(const std::filesystem::path& dir, std::span<const TilePair> pairs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());

  std::string index(kPairsHeader);
  index += '\n';
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    validate_tile_pair(pairs[i]);
    char before_name[48], after_name[48];
    std::snprintf(before_name, sizeof before_name, "pair%05zu_before.lsrs", i);
    std::snprintf(after_name, sizeof after_name, "pair%05zu_after.lsrs", i);
    save_raster(stack_to_scene(pairs[i].before, pairs[i].before_timestamp), dir / before_name);
    save_raster(stack_to_scene(pairs[i].after, pairs[i].after_timestamp), dir / after_name);
    index += pairs[i].source_site;
    index += ';';
    index += std::to_string(pairs[i].label);
    index += ';';
    index += before_name;
    index += ';';
    index += after_name;
    if (pairs[i].landslide_bbox) {
      const auto& r = *pairs[i].landslide_bbox;
      for (std::size_t v : {r.x, r.y, r.w, r.h}) {
        index += ';';
        index += std::to_string(v);
      }
    } else {
      index += ";;;;";
    }
    index += '\n';
  }
  std::ofstream f(dir / "pairs.csv", std::ios::binary | std::ios::trunc);
  if (!f) throw IoError((dir / "pairs.csv").string() + ": cannot open for write");
  f << index;
  if (!f) throw IoError((dir / "pairs.csv").string() + ": write failed");
}

std::vector<TilePair> load_pair_dataset(const std::filesystem::path& dir) {
  std::ifstream f(dir / "pairs.csv");
  if (!f) throw IoError((dir / "pairs.csv").string() + ": cannot open");
  std::string line;
  if (!std::getline(f, line) || line != kPairsHeader) {
    throw ValidationError((dir / "pairs.csv").string() + ": bad or missing header");
  }
  std::vector<TilePair> pairs;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ';')) fields.push_back(field);
    while (fields.size() < 8) fields.push_back({});
    if (fields.size() != 8) {
      throw ValidationError((dir / "pairs.csv").string() + ":" + std::to_string(line_no) +
                            ": expected 8 fields");
    }
    TilePair pair;
    pair.source_site = fields[0];
    pair.label = fields[1] == "1" ? 1 : (fields[1] == "0" ? 0 : -1);
    const RasterScene before = load_raster(dir / fields[2]);
    const RasterScene after = load_raster(dir / fields[3]);
    pair.before = select_bands(before, before.band_ids);
    pair.after = select_bands(after, after.band_ids);
    pair.before_timestamp = before.timestamp;
    pair.after_timestamp = after.timestamp;
    if (!fields[4].empty()) {
      pair.landslide_bbox =
          PixelRect{(std::size_t)std::stoull(fields[4]), (std::size_t)std::stoull(fields[5]),
                    (std::size_t)std::stoull(fields[6]), (std::size_t)std::stoull(fields[7])};
    }
    validate_tile_pair(pair);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace lsw
