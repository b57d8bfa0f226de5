#include "lsw/raster.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace lsw {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'R', 'S'};
constexpr std::uint16_t kVersion = 1;

void put_bytes(std::vector<std::uint8_t>& buf, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  buf.insert(buf.end(), b, b + n);
}

template <typename U>
void put_le(std::vector<std::uint8_t>& buf, U v) {
  static_assert(std::is_integral_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf.push_back((std::uint8_t)((std::make_unsigned_t<U>)v >> (8 * i)));
  }
}

void put_f32(std::vector<std::uint8_t>& buf, float v) { put_le(buf, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<std::uint8_t>& buf, double v) { put_le(buf, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) {
      throw IoError(path + ": truncated, expected " + std::to_string(pos + n) +
                    " bytes, got " + std::to_string(buf.size()));
    }
  }

  template <typename U>
  U get_le() {
    static_assert(std::is_integral_v<U>);
    need(sizeof(U));
    std::make_unsigned_t<U> v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= (std::make_unsigned_t<U>)buf[pos + i] << (8 * i);
    }
    pos += sizeof(U);
    return (U)v;
  }

  float get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
};

std::size_t downsample_factor(std::uint16_t native, const std::string& what) {
  if (native < kGridResolutionM || native % kGridResolutionM != 0) {
    throw ValidationError(what + ": native resolution " + std::to_string(native) +
                          " m is not a multiple of the " + std::to_string(kGridResolutionM) +
                          " m grid");
  }
  return native / kGridResolutionM;
}

}  // namespace

double RasterScene::cloud_fraction(std::size_t x, std::size_t y, std::size_t w,
                                   std::size_t h) const {
  if (cloud_mask.empty() || w == 0 || h == 0) return 0.0;
  double covered = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    const float* row = cloud_mask.data() + (y + r) * width + x;
    for (std::size_t c = 0; c < w; ++c) covered += row[c];
  }
  return covered / (double)(w * h);
}

RasterScene load_raster(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string() + ": cannot open");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  Reader r{buf, 0, path.string()};

  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw IoError(path.string() + ": not an LSRS file (bad magic)");
  }
  r.pos = 4;
  const auto version = r.get_le<std::uint16_t>();
  if (version != kVersion) {
    throw IoError(path.string() + ": unsupported LSRS version " + std::to_string(version));
  }

  RasterScene scene;
  scene.width = r.get_le<std::uint32_t>();
  scene.height = r.get_le<std::uint32_t>();
  if (scene.width == 0 || scene.height == 0) {
    throw ValidationError(path.string() + ": zero raster extent");
  }
  const auto band_count = r.get_le<std::uint8_t>();
  if (band_count == 0) throw ValidationError(path.string() + ": no bands");
  scene.band_ids.resize(band_count);
  for (auto& id : scene.band_ids) id = r.get_le<std::uint8_t>();
  scene.native_resolution_m.resize(band_count);
  for (auto& res : scene.native_resolution_m) res = r.get_le<std::uint16_t>();
  scene.timestamp = r.get_le<std::int64_t>();
  for (auto& g : scene.geo_transform) g = r.get_f64();
  const auto has_mask = r.get_le<std::uint8_t>();

  scene.planes.resize(band_count);
  for (std::size_t b = 0; b < band_count; ++b) {
    const std::size_t factor = downsample_factor(
        scene.native_resolution_m[b], path.string() + " band " + std::to_string(scene.band_ids[b]));
    if (scene.width % factor != 0 || scene.height % factor != 0) {
      throw ValidationError(path.string() + ": band " + std::to_string(scene.band_ids[b]) +
                            " resolution factor " + std::to_string(factor) +
                            " does not divide " + std::to_string(scene.width) + "x" +
                            std::to_string(scene.height));
    }
    const std::size_t sw = scene.width / factor, sh = scene.height / factor;
    std::vector<float> stored(sw * sh);
    for (auto& v : stored) v = r.get_f32();
    if (factor == 1) {
      scene.planes[b] = std::move(stored);
    } else {
      std::vector<float> up(std::size_t(scene.width) * scene.height);
      for (std::size_t y = 0; y < scene.height; ++y) {
        const float* src = stored.data() + (y / factor) * sw;
        float* dst = up.data() + y * scene.width;
        for (std::size_t x = 0; x < scene.width; ++x) dst[x] = src[x / factor];
      }
      scene.planes[b] = std::move(up);
    }
  }
  if (has_mask) {
    scene.cloud_mask.resize(std::size_t(scene.width) * scene.height);
    for (auto& v : scene.cloud_mask) {
      v = r.get_f32();
      if (v != 0.0f && v != 1.0f) {
        throw ValidationError(path.string() + ": cloud mask value " + std::to_string(v) +
                              " is not 0 or 1");
      }
    }
  }
  if (r.pos != buf.size()) {
    throw IoError(path.string() + ": trailing bytes, expected " + std::to_string(r.pos) +
                  " bytes, got " + std::to_string(buf.size()));
  }
  return scene;
}

void save_raster(const RasterScene& scene, const std::filesystem::path& path) {
  if (scene.band_ids.size() != scene.planes.size() ||
      scene.band_ids.size() != scene.native_resolution_m.size()) {
    throw ValidationError("save_raster: band metadata and plane counts disagree");
  }
  const std::size_t px = std::size_t(scene.width) * scene.height;
  std::vector<std::uint8_t> buf;
  put_bytes(buf, kMagic, 4);
  put_le(buf, kVersion);
  put_le(buf, scene.width);
  put_le(buf, scene.height);
  put_le(buf, (std::uint8_t)scene.band_ids.size());
  for (auto id : scene.band_ids) put_le(buf, id);
  for (auto res : scene.native_resolution_m) put_le(buf, res);
  put_le(buf, scene.timestamp);
  for (auto g : scene.geo_transform) put_f64(buf, g);
  put_le(buf, (std::uint8_t)(scene.has_cloud_mask() ? 1 : 0));

  for (std::size_t b = 0; b < scene.planes.size(); ++b) {
    if (scene.planes[b].size() != px) {
      throw ValidationError("save_raster: band " + std::to_string(scene.band_ids[b]) +
                            " plane has " + std::to_string(scene.planes[b].size()) +
                            " values, scene is " + std::to_string(scene.width) + "x" +
                            std::to_string(scene.height));
    }
    const std::size_t factor =
        downsample_factor(scene.native_resolution_m[b],
                          "save_raster band " + std::to_string(scene.band_ids[b]));
    if (scene.width % factor != 0 || scene.height % factor != 0) {
      throw ValidationError("save_raster: band " + std::to_string(scene.band_ids[b]) +
                            " resolution factor does not divide the scene extents");
    }
    // Inverse of the load-time nearest-neighbor upsample: block top-left.
    for (std::size_t y = 0; y < scene.height; y += factor) {
      const float* row = scene.planes[b].data() + y * scene.width;
      for (std::size_t x = 0; x < scene.width; x += factor) put_f32(buf, row[x]);
    }
  }
  if (scene.has_cloud_mask()) {
    if (scene.cloud_mask.size() != px) {
      throw ValidationError("save_raster: cloud mask size mismatch");
    }
    for (float v : scene.cloud_mask) put_f32(buf, v);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path.string() + ": cannot open for write");
  f.write(reinterpret_cast<const char*>(buf.data()), (std::streamsize)buf.size());
  if (!f) throw IoError(path.string() + ": write failed");
}

namespace {

std::size_t find_band(const RasterScene& scene, std::uint8_t wanted) {
  for (std::size_t i = 0; i < scene.band_ids.size(); ++i) {
    if (scene.band_ids[i] == wanted) return i;
  }
  throw ValidationError("band " + std::to_string(wanted) + " not present in scene");
}

}  // namespace

BandStack select_bands(const RasterScene& scene, std::span<const std::uint8_t> wanted) {
  BandStack stack;
  stack.width = scene.width;
  stack.height = scene.height;
  for (auto id : wanted) {
    stack.band_ids.push_back(id);
    stack.planes.push_back(scene.planes[find_band(scene, id)]);
  }
  return stack;
}

RasterScene select_scene_bands(const RasterScene& scene, std::span<const std::uint8_t> wanted) {
  RasterScene out = scene;
  out.band_ids.clear();
  out.native_resolution_m.clear();
  out.planes.clear();
  for (auto id : wanted) {
    const std::size_t i = find_band(scene, id);
    out.band_ids.push_back(id);
    out.native_resolution_m.push_back(scene.native_resolution_m[i]);
    out.planes.push_back(scene.planes[i]);
  }
  return out;
}

BandStack& normalize(BandStack& stack) {
  for (auto& plane : stack.planes) {
    for (auto& v : plane) v = std::clamp(v / kReflectanceCeiling, 0.0f, 1.0f);
  }
  return stack;
}

}  // namespace lsw
