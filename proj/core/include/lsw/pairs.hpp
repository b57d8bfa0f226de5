#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsw/catalog.hpp"
#include "lsw/raster.hpp"
#include "lsw/rng.hpp"
#include "lsw/tensor.hpp"

namespace lsw {

// Windows whose cloud mask covers more than this are rejected while sampling.
inline constexpr double kMaxCloudFraction = 0.30;

struct PixelRect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  bool operator==(const PixelRect&) const = default;
};

struct TilePair {
  BandStack before;
  BandStack after;
  std::int64_t before_timestamp = 0;
  std::int64_t after_timestamp = 0;
  int label = 0;
  std::optional<PixelRect> landslide_bbox;  // present iff label == 1
  std::string source_site;
};

// The one validator every producer and test goes through.
void validate_tile_pair(const TilePair& pair);

// ---- dihedral group (square symmetries) ------------------------------------
// id = r + 4*f: rotate counter-clockwise r times (0..3), then flip
// horizontally if f. rot90 maps source (x, y) to (width-1-y, x).

struct DihedralTransform {
  int id = 0;
};

inline constexpr int kDihedralOrder = 8;

DihedralTransform compose(DihedralTransform first, DihedralTransform second);
DihedralTransform inverse(DihedralTransform t);

std::vector<float> apply_dihedral(const std::vector<float>& plane, std::size_t n,
                                  DihedralTransform t);
PixelRect apply_dihedral(const PixelRect& rect, std::size_t n, DihedralTransform t);

// Applies t to both stacks and the bbox. Square tiles only.
TilePair dihedral_augment(const TilePair& pair, DihedralTransform t);

// ---- pair construction ------------------------------------------------------

// Cuts one tile-sized window, uniform over all offsets whose tile fully
// contains bbox, identical in both scenes. Windows over the cloud threshold
// are resampled.
TilePair sample_window(const RasterScene& before, const RasterScene& after,
                       const PixelRect& bbox, std::size_t tile, std::uint64_t rng_seed,
                       std::string source_site);

// Pairs two distinct pre-event scenes (earlier as before), windows uniform
// over the whole scene. Scenes are re-sorted by timestamp internally.
std::vector<TilePair> build_negative_pairs(std::span<const RasterScene> scenes,
                                           std::size_t tile, std::size_t count,
                                           std::uint64_t rng_seed, std::string source_site);

// Square footprint of side 2*accuracy_km around the catalog point, in pixels
// of the scene grid, clamped to the scene.
PixelRect bbox_from_catalog(const CatalogEntry& entry, const RasterScene& scene);

// ---- on-disk pair dataset ---------------------------------------------------
// dir/pairs.csv indexes LSRS tile files:
//   site;label;before_file;after_file;bbox_x;bbox_y;bbox_w;bbox_h

void save_pair_dataset(const std::filesystem::path& dir, std::span<const TilePair> pairs);
std::vector<TilePair> load_pair_dataset(const std::filesystem::path& dir);

// ---- model input ------------------------------------------------------------
// [N, bands, 2, tile, tile], reflectance scaled by the ceiling and clamped to
// [0,1]; depth 0 is before, depth 1 after.

template <typename T>
TensorPtr<T> tensorize_pairs(std::span<const TilePair> pairs) {
  if (pairs.empty()) throw ValidationError("tensorize: no pairs");
  const std::size_t bands = pairs[0].before.planes.size();
  const std::size_t hh = pairs[0].before.height, ww = pairs[0].before.width;
  auto batch = make_tensor<T>(Shape{pairs.size(), bands, 2, hh, ww});
  T* out = batch->values().data();
  const std::size_t plane_px = hh * ww;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    validate_tile_pair(pairs[i]);
    if (pairs[i].before.planes.size() != bands || pairs[i].before.height != hh ||
        pairs[i].before.width != ww) {
      throw ValidationError("tensorize: pair " + std::to_string(i) +
                            " does not match the batch geometry");
    }
    for (std::size_t b = 0; b < bands; ++b) {
      for (int step = 0; step < 2; ++step) {
        const auto& plane =
            step == 0 ? pairs[i].before.planes[b] : pairs[i].after.planes[b];
        T* dst = out + ((i * bands + b) * 2 + (std::size_t)step) * plane_px;
        for (std::size_t p = 0; p < plane_px; ++p) {
          const float v = plane[p] / kReflectanceCeiling;
          dst[p] = (T)(v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v));
        }
      }
    }
  }
  return batch;
}

template <typename T>
TensorPtr<T> labels_tensor(std::span<const TilePair> pairs) {
  auto labels = make_tensor<T>(Shape{pairs.size()});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    labels->values()[i] = (T)pairs[i].label;
  }
  return labels;
}

}  // namespace lsw
