#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lsw/errors.hpp"

namespace lsw {

// Target pixel grid. Bands stored at a coarser native resolution are
// nearest-neighbor upsampled onto this grid at load time.
inline constexpr std::uint16_t kGridResolutionM = 10;

inline constexpr float kReflectanceCeiling = 10000.0f;

// The five bands the classifier consumes, in model order.
inline constexpr std::array<std::uint8_t, 5> kModelBands{2, 3, 4, 8, 12};

struct RasterScene {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> band_ids;
  std::vector<std::uint16_t> native_resolution_m;  // per band; 10 or a multiple of 10
  std::int64_t timestamp = 0;
  // GDAL-style: X = g[0] + px*g[1] + py*g[2]; Y = g[3] + px*g[4] + py*g[5]
  std::array<double, 6> geo_transform{0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  std::vector<std::vector<float>> planes;  // per band, width*height (upsampled)
  std::vector<float> cloud_mask;           // empty when absent; values {0,1}

  bool has_cloud_mask() const { return !cloud_mask.empty(); }

  // Fraction of masked pixels inside the window; 0 when there is no mask.
  double cloud_fraction(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const;
};

RasterScene load_raster(const std::filesystem::path& path);
void save_raster(const RasterScene& scene, const std::filesystem::path& path);

struct BandStack {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> band_ids;
  std::vector<std::vector<float>> planes;
};

// Stack ordered exactly as `wanted`; missing band -> error naming it.
BandStack select_bands(const RasterScene& scene, std::span<const std::uint8_t> wanted);

// Same selection but keeping the scene wrapper (mask, timestamp, geometry).
RasterScene select_scene_bands(const RasterScene& scene, std::span<const std::uint8_t> wanted);

// Divide by the reflectance ceiling and clamp to [0,1], in place.
BandStack& normalize(BandStack& stack);

}  // namespace lsw
