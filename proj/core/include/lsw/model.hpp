#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lsw/adam.hpp"
#include "lsw/autograd.hpp"
#include "lsw/pairs.hpp"

namespace lsw {

struct ConvLayerSpec {
  std::size_t out_channels = 0;
  Dim3 kernel{1, 3, 3};
  Dim3 pad{0, 1, 1};
  Dim3 pool{1, 1, 1};  // max-pool window and stride; all ones means no pooling
  bool global_pool = false;
};

struct DenseLayerSpec {
  std::size_t out_width = 0;
  Activation activation = Activation::relu;
};

struct NetworkConfig {
  std::size_t tile_size = 512;
  std::size_t input_bands = 5;
  std::size_t time_steps = 2;
  std::vector<ConvLayerSpec> conv_layers;
  std::vector<DenseLayerSpec> dense_layers;
  std::uint64_t init_seed = 0;

  // The production stack: five convolutions then three dense layers. The
  // first kernel spans both time steps, so depth collapses to 1 after it.
  static NetworkConfig defaults(std::size_t tile = 512);
  // Gradient-check scale: two bands, 8-pixel tiles, a few thousand weights.
  static NetworkConfig tiny(std::size_t tile = 8);

  void validate() const;
  // Output shape after each learned layer, for a given batch size.
  std::vector<Shape> layer_output_shapes(std::size_t batch) const;
  std::size_t parameter_count() const;
};

struct Prediction {
  double probability = 0.0;
  int label = 0;
  double threshold = 0.5;
};

namespace detail {

struct RawParam {
  std::string name;
  std::vector<std::uint32_t> extents;
  std::vector<float> data;
};

void write_checkpoint(const std::filesystem::path& path, const NetworkConfig& cfg,
                      const std::vector<RawParam>& params);
NetworkConfig read_checkpoint(const std::filesystem::path& path,
                              std::vector<RawParam>& params);

}  // namespace detail

template <typename T>
class Network {
 public:
  explicit Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(cfg_.init_seed);
    std::size_t channels = cfg_.input_bands;
    for (const auto& spec : cfg_.conv_layers) {
      const auto& k = spec.kernel;
      const double fan_in = (double)(channels * k.d * k.h * k.w);
      LayerParams layer;
      layer.weight = random_normal<T>({spec.out_channels, channels, k.d, k.h, k.w}, rng,
                                      std::sqrt(2.0 / fan_in), true);
      layer.bias = make_tensor<T>(Shape{spec.out_channels}, true);
      conv_params_.push_back(std::move(layer));
      channels = spec.out_channels;
    }
    std::size_t width = channels;
    for (const auto& spec : cfg_.dense_layers) {
      LayerParams layer;
      layer.weight =
          random_normal<T>({width, spec.out_width}, rng, std::sqrt(2.0 / (double)width), true);
      layer.bias = make_tensor<T>(Shape{spec.out_width}, true);
      dense_params_.push_back(std::move(layer));
      width = spec.out_width;
    }
  }

  // Same parameters at a different scalar precision.
  template <typename U>
  explicit Network(const Network<U>& other) : Network(other.config()) {
    auto src = other.named_parameters();
    auto dst = named_parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto sv = src[i].tensor->values();
      auto dv = dst[i].tensor->values();
      for (std::size_t j = 0; j < sv.size(); ++j) dv[j] = static_cast<T>(sv[j]);
    }
  }

  const NetworkConfig& config() const { return cfg_; }
  std::size_t parameter_count() const { return cfg_.parameter_count(); }

  // Weights and biases in layer order: conv1..convN then fcN+1..fc8.
  std::vector<NamedParam<T>> named_parameters() const {
    std::vector<NamedParam<T>> out;
    out.reserve(2 * (conv_params_.size() + dense_params_.size()));
    for (std::size_t i = 0; i < conv_params_.size(); ++i) {
      const std::string base = "conv" + std::to_string(i + 1);
      out.push_back({base + ".weight", conv_params_[i].weight});
      out.push_back({base + ".bias", conv_params_[i].bias});
    }
    for (std::size_t i = 0; i < dense_params_.size(); ++i) {
      const std::string base = "fc" + std::to_string(conv_params_.size() + i + 1);
      out.push_back({base + ".weight", dense_params_[i].weight});
      out.push_back({base + ".bias", dense_params_[i].bias});
    }
    return out;
  }

  // Batch [N, bands, time, tile, tile] to probabilities [N].
  TensorPtr<T> forward(Tape<T>* tape, const TensorPtr<T>& batch) const {
    const Shape expected{0, cfg_.input_bands, cfg_.time_steps, cfg_.tile_size, cfg_.tile_size};
    const Shape& got = batch->shape();
    bool ok = got.size() == 5;
    for (std::size_t i = 1; ok && i < 5; ++i) ok = got[i] == expected[i];
    if (!ok) {
      throw ValidationError("forward: expected batch shape [N," +
                            std::to_string(cfg_.input_bands) + "," +
                            std::to_string(cfg_.time_steps) + "," +
                            std::to_string(cfg_.tile_size) + "," +
                            std::to_string(cfg_.tile_size) + "], got " + shape_str(got));
    }
    TensorPtr<T> x = batch;
    for (std::size_t i = 0; i < cfg_.conv_layers.size(); ++i) {
      const auto& spec = cfg_.conv_layers[i];
      x = conv3d(tape, x, conv_params_[i].weight, conv_params_[i].bias, Dim3{1, 1, 1}, spec.pad);
      x = relu(tape, x);
      if (spec.pool.d * spec.pool.h * spec.pool.w > 1) {
        x = maxpool3d(tape, x, spec.pool, spec.pool);
      }
      if (spec.global_pool) x = global_avg_pool(tape, x);
    }
    for (std::size_t i = 0; i < cfg_.dense_layers.size(); ++i) {
      x = affine(tape, x, dense_params_[i].weight, dense_params_[i].bias);
      x = pointwise(tape, x, cfg_.dense_layers[i].activation);
    }
    return reshape(tape, x, Shape{got[0]});
  }

  Prediction predict(const TilePair& pair) const {
    validate_tile_pair(pair);
    if (pair.before.width != cfg_.tile_size || pair.before.height != cfg_.tile_size) {
      throw ValidationError("predict: tile " + std::to_string(pair.before.width) + "x" +
                            std::to_string(pair.before.height) + " does not match config tile " +
                            std::to_string(cfg_.tile_size));
    }
    if (pair.before.band_ids.size() != cfg_.input_bands) {
      throw ValidationError("predict: pair has " + std::to_string(pair.before.band_ids.size()) +
                            " bands, config expects " + std::to_string(cfg_.input_bands));
    }
    auto batch = tensorize_pairs<T>(std::span<const TilePair>(&pair, 1));
    auto probs = forward(nullptr, batch);
    Prediction p;
    p.probability = (double)probs->values()[0];
    p.label = p.probability >= p.threshold ? 1 : 0;
    return p;
  }

 private:
  struct LayerParams {
    TensorPtr<T> weight;
    TensorPtr<T> bias;
  };

  NetworkConfig cfg_;
  std::vector<LayerParams> conv_params_;
  std::vector<LayerParams> dense_params_;
};

// Checkpoint: "LSNW" magic, config, then parameters in layer order as
// little-endian 32-bit floats with shape headers, whatever the in-memory T.
template <typename T>
void save_network(const Network<T>& net, const std::filesystem::path& path) {
  std::vector<detail::RawParam> raw;
  for (const auto& p : net.named_parameters()) {
    detail::RawParam rp;
    rp.name = p.name;
    for (std::size_t e : p.tensor->shape()) rp.extents.push_back((std::uint32_t)e);
    rp.data.reserve(p.tensor->numel());
    for (const T& v : p.tensor->values()) rp.data.push_back((float)v);
    raw.push_back(std::move(rp));
  }
  detail::write_checkpoint(path, net.config(), raw);
}

template <typename T>
Network<T> load_network(const std::filesystem::path& path) {
  std::vector<detail::RawParam> raw;
  NetworkConfig cfg = detail::read_checkpoint(path, raw);
  Network<T> net(cfg);
  auto params = net.named_parameters();
  if (params.size() != raw.size()) {
    throw ValidationError(path.string() + ": checkpoint has " + std::to_string(raw.size()) +
                          " parameter tensors, config implies " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].tensor->shape();
    bool match = raw[i].extents.size() == shape.size();
    for (std::size_t a = 0; match && a < shape.size(); ++a) {
      match = raw[i].extents[a] == shape[a];
    }
    if (!match || raw[i].name != params[i].name) {
      throw ValidationError(path.string() + ": parameter " + std::to_string(i) +
                            " does not match config (expected " + params[i].name + " " +
                            shape_str(shape) + ")");
    }
    auto dst = params[i].tensor->values();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      const float v = raw[i].data[j];
      if (!std::isfinite(v)) {
        throw ValidationError(path.string() + ": non-finite value in " + params[i].name);
      }
      dst[j] = static_cast<T>(v);
    }
  }
  return net;
}

}  // namespace lsw
