#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lsw/pairs.hpp"
#include "lsw/raster.hpp"

namespace lsw {

// Reflectance deltas a scar adds to bands 2,3,4,8,12: visible and SWIR rise
// on bare ground, NIR drops with the lost vegetation.
constexpr std::array<float, 5> kScarBandDelta = {300.0f, 375.0f, 1350.0f, -2700.0f, 1950.0f};

// Base terrain reflectance per band 2,3,4,8,12: mean and noise amplitude.
constexpr std::array<float, 5> kBandBaseMean = {1000.0f, 1300.0f, 1200.0f, 3600.0f, 1900.0f};
constexpr std::array<float, 5> kBandBaseAmp = {300.0f, 350.0f, 400.0f, 700.0f, 500.0f};

constexpr float kCloudReflectance = 9000.0f;

struct ScarSpec {
  double center_x = 0.0;  // scene pixels
  double center_y = 0.0;
  double length_px = 0.0;
  double width_px = 0.0;
  double orientation_deg = 0.0;
  std::array<float, 5> band_delta = kScarBandDelta;
};

struct SceneSpec {
  std::size_t size = 96;
  std::uint64_t seed = 0;
  bool has_landslide = false;
  ScarSpec scar;
  double illumination_delta = 1.0;  // multiplies the after image
  double cloud_fraction = 0.0;      // target cover on the after image
  double texture_scale = 32.0;      // correlation length of the base noise octave

  void validate() const;
};

struct GroundTruth {
  int label = 0;
  PixelRect scar_bbox{0, 0, 0, 0};        // tight bounds of scar_mask, label 1 only
  std::vector<std::uint8_t> scar_mask;    // size*size, 1 where the scar touches
};

struct ScenePair {
  RasterScene before;
  RasterScene after;
  GroundTruth truth;
};

ScenePair generate_scene_pair(const SceneSpec& spec);

// Writes per-site scene directories plus catalog.csv and truth.csv. Every
// site gets three scenes five days apart; positive sites carry the scar on
// the last one. Returns the site ids in directory order.
struct DatasetLayout {
  std::filesystem::path catalog_file;
  std::filesystem::path truth_file;
  std::vector<std::string> site_ids;
};

DatasetLayout generate_dataset(const std::filesystem::path& dir, std::size_t n_positive,
                               std::size_t n_negative, std::size_t size,
                               std::uint64_t master_seed);

// Band-12 change heuristic: a pair is called positive when the mean absolute
// before/after difference inside the bbox clears both the outside mean by
// kHeuristicRatio and the absolute floor. Negative pairs are probed with a
// centered box. A cheap oracle for dataset separability, not a model.
constexpr double kHeuristicRatio = 2.0;
constexpr double kHeuristicFloor = 25.0;

int heuristic_label(const TilePair& pair);

}  // namespace lsw
