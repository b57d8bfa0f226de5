#include "lsw/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lsw/errors.hpp"
#include "lsw/ops.hpp"

namespace lsw {

NetworkConfig NetworkConfig::defaults(std::size_t tile) {
  NetworkConfig cfg;
  cfg.tile_size = tile;
  cfg.input_bands = 5;
  cfg.time_steps = 2;
  cfg.conv_layers = {
      {16, Dim3{2, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 2, 2}, false},
      {32, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 2, 2}, false},
      {64, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 2, 2}, false},
      {64, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 2, 2}, false},
      {128, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 1, 1}, true},
  };
  cfg.dense_layers = {
      {64, Activation::relu},
      {16, Activation::relu},
      {1, Activation::sigmoid},
  };
  return cfg;
}

NetworkConfig NetworkConfig::tiny(std::size_t tile) {
  NetworkConfig cfg;
  cfg.tile_size = tile;
  cfg.input_bands = 2;
  cfg.time_steps = 2;
  cfg.conv_layers = {
      {4, Dim3{2, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 2, 2}, false},
      {4, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 2, 2}, false},
      {8, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 2, 2}, false},
      {8, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 1, 1}, false},
      {8, Dim3{1, 3, 3}, Dim3{0, 1, 1}, Dim3{1, 1, 1}, true},
  };
  cfg.dense_layers = {
      {8, Activation::relu},
      {4, Activation::relu},
      {1, Activation::sigmoid},
  };
  return cfg;
}

void NetworkConfig::validate() const {
  if (tile_size == 0 || input_bands == 0 || time_steps == 0) {
    throw ValidationError("network config: tile_size, input_bands and time_steps must be positive");
  }
  const std::size_t learned = conv_layers.size() + dense_layers.size();
  if (learned != 8) {
    throw ValidationError("network config: expected exactly 8 learned layers, got " +
                          std::to_string(learned));
  }
  if (conv_layers.empty() || dense_layers.empty()) {
    throw ValidationError("network config: need at least one convolutional and one dense layer");
  }
  if (conv_layers.front().kernel.d != time_steps) {
    throw ValidationError("network config: first convolution depth extent " +
                          std::to_string(conv_layers.front().kernel.d) +
                          " must equal time_steps " + std::to_string(time_steps));
  }
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& spec = conv_layers[i];
    if (spec.out_channels == 0) {
      throw ValidationError("network config: conv layer " + std::to_string(i + 1) +
                            " has zero channels");
    }
    if (spec.kernel.d == 0 || spec.kernel.h == 0 || spec.kernel.w == 0 || spec.pool.d == 0 ||
        spec.pool.h == 0 || spec.pool.w == 0) {
      throw ValidationError("network config: conv layer " + std::to_string(i + 1) +
                            " has a zero kernel or pool extent");
    }
    if (spec.global_pool != (i + 1 == conv_layers.size())) {
      throw ValidationError("network config: global pooling must sit on the last conv layer only");
    }
  }
  for (std::size_t i = 0; i < dense_layers.size(); ++i) {
    if (dense_layers[i].out_width == 0) {
      throw ValidationError("network config: dense layer " + std::to_string(i + 1) +
                            " has zero width");
    }
  }
  if (dense_layers.back().out_width != 1 ||
      dense_layers.back().activation != Activation::sigmoid) {
    throw ValidationError("network config: final layer must be a width-1 sigmoid");
  }
  layer_output_shapes(1);  // walks the shape chain, throws on any mismatch
}

std::vector<Shape> NetworkConfig::layer_output_shapes(std::size_t batch) const {
  std::vector<Shape> out;
  Shape x{batch, input_bands, time_steps, tile_size, tile_size};
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& spec = conv_layers[i];
    const auto& k = spec.kernel;
    x = conv3d_output_shape(x, Shape{spec.out_channels, x[1], k.d, k.h, k.w}, Dim3{1, 1, 1},
                            spec.pad);
    if (spec.pool.d * spec.pool.h * spec.pool.w > 1) {
      if (x[2] % spec.pool.d != 0 || x[3] % spec.pool.h != 0 || x[4] % spec.pool.w != 0) {
        throw ValidationError("network config: conv layer " + std::to_string(i + 1) +
                              " output " + shape_str(x) + " is not divisible by its pool window");
      }
      x = maxpool3d_output_shape(x, spec.pool, spec.pool);
    }
    if (spec.global_pool) x = Shape{x[0], x[1]};
    out.push_back(x);
  }
  for (const auto& spec : dense_layers) {
    x = Shape{x[0], spec.out_width};
    out.push_back(x);
  }
  return out;
}

std::size_t NetworkConfig::parameter_count() const {
  std::size_t total = 0;
  std::size_t channels = input_bands;
  for (const auto& spec : conv_layers) {
    total += spec.out_channels * channels * spec.kernel.d * spec.kernel.h * spec.kernel.w +
             spec.out_channels;
    channels = spec.out_channels;
  }
  std::size_t width = channels;
  for (const auto& spec : dense_layers) {
    total += width * spec.out_width + spec.out_width;
    width = spec.out_width;
  }
  return total;
}

namespace detail {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'N', 'W'};
constexpr std::uint16_t kVersion = 1;

void put_u8(std::string& out, std::uint8_t v) { out.push_back((char)v); }

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back((char)(v & 0xff));
  out.push_back((char)(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((char)((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((char)((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

struct ByteReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n) const {
    if (pos + n > size) throw IoError(path + ": truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = (std::uint16_t)(data[pos] | (data[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (std::uint32_t)data[pos + i] << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= (std::uint64_t)data[pos + i] << (8 * i);
    pos += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s((const char*)data + pos, n);
    pos += n;
    return s;
  }
};

void append_config(std::string& out, const NetworkConfig& cfg) {
  put_u32(out, (std::uint32_t)cfg.tile_size);
  put_u32(out, (std::uint32_t)cfg.input_bands);
  put_u32(out, (std::uint32_t)cfg.time_steps);
  put_u64(out, cfg.init_seed);
  put_u8(out, (std::uint8_t)cfg.conv_layers.size());
  for (const auto& spec : cfg.conv_layers) {
    put_u32(out, (std::uint32_t)spec.out_channels);
    for (std::size_t e : {spec.kernel.d, spec.kernel.h, spec.kernel.w, spec.pad.d, spec.pad.h,
                          spec.pad.w, spec.pool.d, spec.pool.h, spec.pool.w}) {
      put_u16(out, (std::uint16_t)e);
    }
    put_u8(out, spec.global_pool ? 1 : 0);
  }
  put_u8(out, (std::uint8_t)cfg.dense_layers.size());
  for (const auto& spec : cfg.dense_layers) {
    put_u32(out, (std::uint32_t)spec.out_width);
    put_u8(out, spec.activation == Activation::sigmoid ? 1 : 0);
  }
}

NetworkConfig parse_config(ByteReader& r) {
  NetworkConfig cfg;
  cfg.tile_size = r.u32();
  cfg.input_bands = r.u32();
  cfg.time_steps = r.u32();
  cfg.init_seed = r.u64();
  const std::size_t n_conv = r.u8();
  cfg.conv_layers.resize(n_conv);
  for (auto& spec : cfg.conv_layers) {
    spec.out_channels = r.u32();
    spec.kernel = Dim3{r.u16(), r.u16(), r.u16()};
    spec.pad = Dim3{r.u16(), r.u16(), r.u16()};
    spec.pool = Dim3{r.u16(), r.u16(), r.u16()};
    spec.global_pool = r.u8() != 0;
  }
  const std::size_t n_dense = r.u8();
  cfg.dense_layers.resize(n_dense);
  for (auto& spec : cfg.dense_layers) {
    spec.out_width = r.u32();
    spec.activation = r.u8() != 0 ? Activation::sigmoid : Activation::relu;
  }
  return cfg;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const NetworkConfig& cfg,
                      const std::vector<RawParam>& params) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u16(out, kVersion);
  append_config(out, cfg);
  put_u16(out, (std::uint16_t)params.size());
  for (const auto& p : params) {
    put_u8(out, (std::uint8_t)p.name.size());
    out.append(p.name);
    put_u8(out, (std::uint8_t)p.extents.size());
    std::size_t numel = 1;
    for (std::uint32_t e : p.extents) {
      put_u32(out, e);
      numel *= e;
    }
    if (numel != p.data.size()) {
      throw ValidationError(path.string() + ": parameter '" + p.name +
                            "' shape does not match its data size");
    }
    for (float v : p.data) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path.string() + ": cannot open for write");
  f.write(out.data(), (std::streamsize)out.size());
  if (!f) throw IoError(path.string() + ": write failed");
}

NetworkConfig read_checkpoint(const std::filesystem::path& path, std::vector<RawParam>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string() + ": cannot open");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ByteReader r{(const unsigned char*)buf.data(), buf.size(), 0, path.string()};
  r.need(sizeof kMagic);
  if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError(path.string() + ": not a network checkpoint (bad magic)");
  }
  r.pos = sizeof kMagic;
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  NetworkConfig cfg = parse_config(r);
  const std::size_t count = r.u16();
  params.clear();
  params.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RawParam p;
    p.name = r.str(r.u8());
    const std::size_t rank = r.u8();
    std::size_t numel = 1;
    for (std::size_t a = 0; a < rank; ++a) {
      p.extents.push_back(r.u32());
      numel *= p.extents.back();
    }
    p.data.reserve(numel);
    for (std::size_t j = 0; j < numel; ++j) p.data.push_back(r.f32());
    params.push_back(std::move(p));
  }
  if (r.pos != buf.size()) {
    throw IoError(path.string() + ": trailing bytes after checkpoint payload");
  }
  return cfg;
}

}  // namespace detail

}  // namespace lsw
