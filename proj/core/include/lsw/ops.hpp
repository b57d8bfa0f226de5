#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "lsw/tensor.hpp"

// Forward kernels and their gradient counterparts. Inner loops accumulate in
// acc_t<T> — double for float/double tensors, the type itself when it is wider
// than double — and results are stored back at the value type. All loops run
// in a fixed order, so identical inputs give bit-identical outputs. Backward
// functions accumulate (+=) into the gradient spans they are given; an empty
// span skips that gradient.

namespace lsw {

template <typename T>
using acc_t = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

struct Dim3 {
  std::size_t d = 1;
  std::size_t h = 1;
  std::size_t w = 1;
};

enum class Activation { relu, sigmoid };
enum class Reduction { sum, mean };

namespace detail {

inline void check_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ValidationError(std::string(what) + ": expected rank " + std::to_string(rank) +
                          ", got shape " + shape_str(s));
  }
}

inline std::size_t out_extent(std::size_t in, std::size_t pad, std::size_t k,
                              std::size_t stride, const char* axis, const char* op) {
  if (stride == 0) {
    throw ValidationError(std::string(op) + ": stride must be positive on " +
                          std::string(axis) + " axis");
  }
  const std::size_t padded = in + 2 * pad;
  if (k == 0 || k > padded) {
    throw ValidationError(std::string(op) + ": window extent " + std::to_string(k) + " on " +
                          axis + " axis exceeds padded input extent " + std::to_string(padded));
  }
  return (padded - k) / stride + 1;
}

}  // namespace detail

inline Shape conv3d_output_shape(const Shape& input, const Shape& kernel, Dim3 stride,
                                 Dim3 pad) {
  return {input[0], kernel[0],
          detail::out_extent(input[2], pad.d, kernel[2], stride.d, "depth", "conv3d"),
          detail::out_extent(input[3], pad.h, kernel[3], stride.h, "height", "conv3d"),
          detail::out_extent(input[4], pad.w, kernel[4], stride.w, "width", "conv3d")};
}

inline Shape maxpool3d_output_shape(const Shape& input, Dim3 window, Dim3 stride) {
  return {input[0], input[1],
          detail::out_extent(input[2], 0, window.d, stride.d, "depth", "maxpool3d"),
          detail::out_extent(input[3], 0, window.h, stride.h, "height", "maxpool3d"),
          detail::out_extent(input[4], 0, window.w, stride.w, "width", "maxpool3d")};
}

// -------------------------------------------------------------------------
// conv3d: input [N,C,D,H,W] (*) kernel [F,C,kd,kh,kw] + bias [F]
// -> [N,F,D',H',W'] with E' = (E + 2*pad - k)/stride + 1 per spatial axis.
// Cross-correlation, like every mainstream framework.
// -------------------------------------------------------------------------

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& kernel,
                         const Tensor<T>& bias, Dim3 stride, Dim3 pad) {
  using Acc = acc_t<T>;
  detail::check_rank(input.shape(), 5, "conv3d input");
  detail::check_rank(kernel.shape(), 5, "conv3d kernel");
  detail::check_rank(bias.shape(), 1, "conv3d bias");

  const std::size_t N = input.extent(0), C = input.extent(1), D = input.extent(2),
                    H = input.extent(3), W = input.extent(4);
  const std::size_t F = kernel.extent(0), KC = kernel.extent(1), KD = kernel.extent(2),
                    KH = kernel.extent(3), KW = kernel.extent(4);
  if (KC != C) {
    throw ValidationError("conv3d: kernel channel count " + std::to_string(KC) +
                          " does not match input channel count " + std::to_string(C));
  }
  if (bias.extent(0) != F) {
    throw ValidationError("conv3d: bias extent " + std::to_string(bias.extent(0)) +
                          " does not match filter count " + std::to_string(F));
  }
  const Shape out_shape = conv3d_output_shape(input.shape(), kernel.shape(), stride, pad);
  const std::size_t Do = out_shape[2], Ho = out_shape[3], Wo = out_shape[4];

  Tensor<T> out(out_shape);
  const T* in = input.values().data();
  const T* ker = kernel.values().data();
  const T* bs = bias.values().data();
  T* o = out.values().data();

  const std::int64_t sd = (std::int64_t)stride.d, sh = (std::int64_t)stride.h,
                     sw = (std::int64_t)stride.w;
  std::vector<Acc> acc(Wo);

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      const Acc b = (Acc)bs[f];
      for (std::size_t od = 0; od < Do; ++od) {
        for (std::size_t oh = 0; oh < Ho; ++oh) {
          std::fill(acc.begin(), acc.end(), Acc(0));
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t kd = 0; kd < KD; ++kd) {
              const std::int64_t id = (std::int64_t)od * sd - (std::int64_t)pad.d + (std::int64_t)kd;
              if (id < 0 || id >= (std::int64_t)D) continue;
              for (std::size_t kh = 0; kh < KH; ++kh) {
                const std::int64_t ih = (std::int64_t)oh * sh - (std::int64_t)pad.h + (std::int64_t)kh;
                if (ih < 0 || ih >= (std::int64_t)H) continue;
                const T* in_row = in + (((n * C + c) * D + (std::size_t)id) * H + (std::size_t)ih) * W;
                const T* k_row = ker + (((f * C + c) * KD + kd) * KH + kh) * KW;
                for (std::size_t kw = 0; kw < KW; ++kw) {
                  const Acc kv = (Acc)k_row[kw];
                  const std::int64_t iw0 = (std::int64_t)kw - (std::int64_t)pad.w;
                  // ow values keeping 0 <= ow*sw + iw0 < W
                  std::int64_t lo = iw0 < 0 ? (-iw0 + sw - 1) / sw : 0;
                  std::int64_t hi = ((std::int64_t)W - 1 - iw0) / sw;
                  if (hi >= (std::int64_t)Wo) hi = (std::int64_t)Wo - 1;
                  const T* src = in_row + iw0;
                  for (std::int64_t ow = lo; ow <= hi; ++ow) {
                    acc[(std::size_t)ow] += kv * (Acc)src[ow * sw];
                  }
                }
              }
            }
          }
          T* out_row = o + (((n * F + f) * Do + od) * Ho + oh) * Wo;
          for (std::size_t ow = 0; ow < Wo; ++ow) out_row[ow] = (T)(acc[ow] + b);
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv3d_backward(const Tensor<T>& input, const Tensor<T>& kernel, Dim3 stride, Dim3 pad,
                     std::span<const T> grad_out, std::span<T> grad_input,
                     std::span<T> grad_kernel, std::span<T> grad_bias) {
  using Acc = acc_t<T>;
  const std::size_t N = input.extent(0), C = input.extent(1), D = input.extent(2),
                    H = input.extent(3), W = input.extent(4);
  const std::size_t F = kernel.extent(0), KD = kernel.extent(2), KH = kernel.extent(3),
                    KW = kernel.extent(4);
  const Shape out_shape = conv3d_output_shape(input.shape(), kernel.shape(), stride, pad);
  const std::size_t Do = out_shape[2], Ho = out_shape[3], Wo = out_shape[4];

  const T* in = input.values().data();
  const T* ker = kernel.values().data();
  const T* go = grad_out.data();
  const std::int64_t sd = (std::int64_t)stride.d, sh = (std::int64_t)stride.h,
                     sw = (std::int64_t)stride.w;

  if (!grad_kernel.empty() || !grad_bias.empty()) {
    std::vector<Acc> kacc(C * KD * KH * KW);
    for (std::size_t f = 0; f < F; ++f) {
      std::fill(kacc.begin(), kacc.end(), Acc(0));
      Acc bacc = 0;
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t od = 0; od < Do; ++od) {
          for (std::size_t oh = 0; oh < Ho; ++oh) {
            const T* go_row = go + (((n * F + f) * Do + od) * Ho + oh) * Wo;
            if (!grad_bias.empty()) {
              for (std::size_t ow = 0; ow < Wo; ++ow) bacc += (Acc)go_row[ow];
            }
            if (grad_kernel.empty()) continue;
            for (std::size_t c = 0; c < C; ++c) {
              for (std::size_t kd = 0; kd < KD; ++kd) {
                const std::int64_t id = (std::int64_t)od * sd - (std::int64_t)pad.d + (std::int64_t)kd;
                if (id < 0 || id >= (std::int64_t)D) continue;
                for (std::size_t kh = 0; kh < KH; ++kh) {
                  const std::int64_t ih = (std::int64_t)oh * sh - (std::int64_t)pad.h + (std::int64_t)kh;
                  if (ih < 0 || ih >= (std::int64_t)H) continue;
                  const T* in_row = in + (((n * C + c) * D + (std::size_t)id) * H + (std::size_t)ih) * W;
                  Acc* ka = kacc.data() + ((c * KD + kd) * KH + kh) * KW;
                  for (std::size_t kw = 0; kw < KW; ++kw) {
                    const std::int64_t iw0 = (std::int64_t)kw - (std::int64_t)pad.w;
                    std::int64_t lo = iw0 < 0 ? (-iw0 + sw - 1) / sw : 0;
                    std::int64_t hi = ((std::int64_t)W - 1 - iw0) / sw;
                    if (hi >= (std::int64_t)Wo) hi = (std::int64_t)Wo - 1;
                    const T* src = in_row + iw0;
                    Acc dot = 0;
                    for (std::int64_t ow = lo; ow <= hi; ++ow) {
                      dot += (Acc)go_row[ow] * (Acc)src[ow * sw];
                    }
                    ka[kw] += dot;
                  }
                }
              }
            }
          }
        }
      }
      if (!grad_kernel.empty()) {
        T* gk = grad_kernel.data() + f * C * KD * KH * KW;
        for (std::size_t i = 0; i < kacc.size(); ++i) gk[i] = (T)((Acc)gk[i] + kacc[i]);
      }
      if (!grad_bias.empty()) {
        grad_bias[f] = (T)((Acc)grad_bias[f] + bacc);
      }
    }
  }

  if (!grad_input.empty()) {
    std::vector<Acc> iacc(input.numel(), Acc(0));
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t od = 0; od < Do; ++od) {
          for (std::size_t oh = 0; oh < Ho; ++oh) {
            const T* go_row = go + (((n * F + f) * Do + od) * Ho + oh) * Wo;
            for (std::size_t c = 0; c < C; ++c) {
              for (std::size_t kd = 0; kd < KD; ++kd) {
                const std::int64_t id = (std::int64_t)od * sd - (std::int64_t)pad.d + (std::int64_t)kd;
                if (id < 0 || id >= (std::int64_t)D) continue;
                for (std::size_t kh = 0; kh < KH; ++kh) {
                  const std::int64_t ih = (std::int64_t)oh * sh - (std::int64_t)pad.h + (std::int64_t)kh;
                  if (ih < 0 || ih >= (std::int64_t)H) continue;
                  Acc* gi_row = iacc.data() + (((n * C + c) * D + (std::size_t)id) * H + (std::size_t)ih) * W;
                  const T* k_row = ker + (((f * C + c) * KD + kd) * KH + kh) * KW;
                  for (std::size_t kw = 0; kw < KW; ++kw) {
                    const Acc kv = (Acc)k_row[kw];
                    const std::int64_t iw0 = (std::int64_t)kw - (std::int64_t)pad.w;
                    std::int64_t lo = iw0 < 0 ? (-iw0 + sw - 1) / sw : 0;
                    std::int64_t hi = ((std::int64_t)W - 1 - iw0) / sw;
                    if (hi >= (std::int64_t)Wo) hi = (std::int64_t)Wo - 1;
                    Acc* dst = gi_row + iw0;
                    for (std::int64_t ow = lo; ow <= hi; ++ow) {
                      dst[ow * sw] += kv * (Acc)go_row[ow];
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
    for (std::size_t i = 0; i < iacc.size(); ++i) {
      grad_input[i] = (T)((Acc)grad_input[i] + iacc[i]);
    }
  }
}

// -------------------------------------------------------------------------
// maxpool3d, no padding. Ties go to the lowest linear index.
// -------------------------------------------------------------------------

template <typename T>
Tensor<T> maxpool3d_forward(const Tensor<T>& input, Dim3 window, Dim3 stride,
                            std::vector<std::size_t>* argmax = nullptr) {
  detail::check_rank(input.shape(), 5, "maxpool3d input");
  const std::size_t N = input.extent(0), C = input.extent(1), D = input.extent(2),
                    H = input.extent(3), W = input.extent(4);
  const Shape out_shape = maxpool3d_output_shape(input.shape(), window, stride);
  const std::size_t Do = out_shape[2], Ho = out_shape[3], Wo = out_shape[4];

  Tensor<T> out(out_shape);
  if (argmax) argmax->assign(out.numel(), 0);
  const T* in = input.values().data();
  T* o = out.values().data();

  std::size_t oi = 0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* plane = in + (n * C + c) * D * H * W;
      for (std::size_t od = 0; od < Do; ++od) {
        for (std::size_t oh = 0; oh < Ho; ++oh) {
          for (std::size_t ow = 0; ow < Wo; ++ow, ++oi) {
            const std::size_t d0 = od * stride.d, h0 = oh * stride.h, w0 = ow * stride.w;
            T best = plane[(d0 * H + h0) * W + w0];
            std::size_t best_idx = (d0 * H + h0) * W + w0;
            for (std::size_t dd = 0; dd < window.d; ++dd) {
              for (std::size_t hh = 0; hh < window.h; ++hh) {
                const T* row = plane + ((d0 + dd) * H + h0 + hh) * W + w0;
                for (std::size_t ww = 0; ww < window.w; ++ww) {
                  if (row[ww] > best) {
                    best = row[ww];
                    best_idx = ((d0 + dd) * H + h0 + hh) * W + w0 + ww;
                  }
                }
              }
            }
            o[oi] = best;
            if (argmax) (*argmax)[oi] = (n * C + c) * D * H * W + best_idx;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void maxpool3d_backward(std::span<const T> grad_out, const std::vector<std::size_t>& argmax,
                        std::span<T> grad_input) {
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_input[argmax[i]] += grad_out[i];
}

// -------------------------------------------------------------------------
// affine: x [N,K] * w [K,M] + b [M] -> [N,M]
// -------------------------------------------------------------------------

template <typename T>
Tensor<T> affine_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  using Acc = acc_t<T>;
  detail::check_rank(x.shape(), 2, "affine input");
  detail::check_rank(w.shape(), 2, "affine weight");
  detail::check_rank(b.shape(), 1, "affine bias");
  const std::size_t N = x.extent(0), K = x.extent(1), M = w.extent(1);
  if (w.extent(0) != K) {
    throw ValidationError("affine: weight rows " + std::to_string(w.extent(0)) +
                          " do not match input width " + std::to_string(K));
  }
  if (b.extent(0) != M) {
    throw ValidationError("affine: bias extent " + std::to_string(b.extent(0)) +
                          " does not match output width " + std::to_string(M));
  }
  Tensor<T> y({N, M});
  const T* xp = x.values().data();
  const T* wp = w.values().data();
  const T* bp = b.values().data();
  T* yp = y.values().data();
  std::vector<Acc> acc(M);
  for (std::size_t n = 0; n < N; ++n) {
    std::fill(acc.begin(), acc.end(), Acc(0));
    for (std::size_t k = 0; k < K; ++k) {
      const Acc a = (Acc)xp[n * K + k];
      const T* wrow = wp + k * M;
      for (std::size_t m = 0; m < M; ++m) acc[m] += a * (Acc)wrow[m];
    }
    for (std::size_t m = 0; m < M; ++m) yp[n * M + m] = (T)(acc[m] + (Acc)bp[m]);
  }
  return y;
}

template <typename T>
void affine_backward(const Tensor<T>& x, const Tensor<T>& w, std::span<const T> grad_out,
                     std::span<T> grad_x, std::span<T> grad_w, std::span<T> grad_b) {
  using Acc = acc_t<T>;
  const std::size_t N = x.extent(0), K = x.extent(1), M = w.extent(1);
  const T* xp = x.values().data();
  const T* wp = w.values().data();
  const T* go = grad_out.data();

  if (!grad_x.empty()) {
    for (std::size_t n = 0; n < N; ++n) {
      const T* grow = go + n * M;
      for (std::size_t k = 0; k < K; ++k) {
        const T* wrow = wp + k * M;
        Acc dot = 0;
        for (std::size_t m = 0; m < M; ++m) dot += (Acc)grow[m] * (Acc)wrow[m];
        grad_x[n * K + k] = (T)((Acc)grad_x[n * K + k] + dot);
      }
    }
  }
  if (!grad_w.empty()) {
    std::vector<Acc> wacc(K * M, Acc(0));
    for (std::size_t n = 0; n < N; ++n) {
      const T* grow = go + n * M;
      for (std::size_t k = 0; k < K; ++k) {
        const Acc a = (Acc)xp[n * K + k];
        Acc* wrow = wacc.data() + k * M;
        for (std::size_t m = 0; m < M; ++m) wrow[m] += a * (Acc)grow[m];
      }
    }
    for (std::size_t i = 0; i < wacc.size(); ++i) {
      grad_w[i] = (T)((Acc)grad_w[i] + wacc[i]);
    }
  }
  if (!grad_b.empty()) {
    for (std::size_t m = 0; m < M; ++m) {
      Acc s = 0;
      for (std::size_t n = 0; n < N; ++n) s += (Acc)go[n * M + m];
      grad_b[m] = (T)((Acc)grad_b[m] + s);
    }
  }
}

// -------------------------------------------------------------------------
// pointwise activations
// -------------------------------------------------------------------------

template <typename T>
Tensor<T> pointwise_forward(const Tensor<T>& x, Activation kind) {
  using Acc = acc_t<T>;
  Tensor<T> y(x.shape());
  const T* xp = x.values().data();
  T* yp = y.values().data();
  const std::size_t n = x.numel();
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < n; ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
  } else {
    // Saturated values are nudged back inside so the output stays in (0,1).
    const T hi = std::nextafter(T(1), T(0));
    const T lo = std::numeric_limits<T>::min();
    for (std::size_t i = 0; i < n; ++i) {
      const T s = (T)(Acc(1) / (Acc(1) + std::exp(-(Acc)xp[i])));
      yp[i] = std::clamp(s, lo, hi);
    }
  }
  return y;
}

// relu differentiates off the input, sigmoid off the output.
template <typename T>
void pointwise_backward(const Tensor<T>& x, const Tensor<T>& y, Activation kind,
                        std::span<const T> grad_out, std::span<T> grad_x) {
  using Acc = acc_t<T>;
  const T* xp = x.values().data();
  const T* yp = y.values().data();
  const std::size_t n = x.numel();
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < n; ++i) {
      if (xp[i] > T(0)) grad_x[i] += grad_out[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const Acc s = (Acc)yp[i];
      grad_x[i] = (T)((Acc)grad_x[i] + (Acc)grad_out[i] * s * (Acc(1) - s));
    }
  }
}

// -------------------------------------------------------------------------
// global average pool over (D,H,W): [N,C,D,H,W] -> [N,C]
// -------------------------------------------------------------------------

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  using Acc = acc_t<T>;
  detail::check_rank(x.shape(), 5, "global_avg_pool input");
  const std::size_t N = x.extent(0), C = x.extent(1);
  const std::size_t vol = x.extent(2) * x.extent(3) * x.extent(4);
  Tensor<T> y({N, C});
  const T* xp = x.values().data();
  T* yp = y.values().data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* plane = xp + nc * vol;
    Acc s = 0;
    for (std::size_t i = 0; i < vol; ++i) s += (Acc)plane[i];
    yp[nc] = (T)(s / (Acc)vol);
  }
  return y;
}

template <typename T>
void global_avg_pool_backward(const Shape& in_shape, std::span<const T> grad_out,
                              std::span<T> grad_x) {
  using Acc = acc_t<T>;
  const std::size_t vol = in_shape[2] * in_shape[3] * in_shape[4];
  for (std::size_t nc = 0; nc < grad_out.size(); ++nc) {
    const T share = (T)((Acc)grad_out[nc] / (Acc)vol);
    T* plane = grad_x.data() + nc * vol;
    for (std::size_t i = 0; i < vol; ++i) plane[i] += share;
  }
}

// -------------------------------------------------------------------------
// binary cross-entropy on probabilities against {0,1} labels
// -------------------------------------------------------------------------

inline constexpr double kBceClamp = 1e-7;  // probability floor/ceiling before logs

template <typename T>
void check_bce_labels(const Tensor<T>& label) {
  for (const T& v : label.values()) {
    if (v != T(0) && v != T(1)) {
      throw ValidationError("bce_loss: label value " + std::to_string((double)v) +
                            " is not 0 or 1");
    }
  }
}

template <typename T>
T bce_forward(const Tensor<T>& pred, const Tensor<T>& label, Reduction reduction) {
  using Acc = acc_t<T>;
  if (pred.shape() != label.shape()) {
    throw ValidationError("bce_loss: prediction shape " + shape_str(pred.shape()) +
                          " does not match label shape " + shape_str(label.shape()));
  }
  check_bce_labels(label);
  const T* p = pred.values().data();
  const T* y = label.values().data();
  const std::size_t n = pred.numel();
  Acc sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Acc pc = std::clamp((Acc)p[i], (Acc)kBceClamp, Acc(1) - (Acc)kBceClamp);
    sum -= y[i] == T(1) ? std::log(pc) : std::log(Acc(1) - pc);
  }
  if (reduction == Reduction::mean) sum /= (Acc)n;
  return (T)sum;
}

// d/dp of the per-element term; zero where the clamp saturates.
template <typename T>
void bce_backward(const Tensor<T>& pred, const Tensor<T>& label, Reduction reduction,
                  T upstream, std::span<T> grad_pred) {
  using Acc = acc_t<T>;
  const T* p = pred.values().data();
  const T* y = label.values().data();
  const std::size_t n = pred.numel();
  const Acc scale = (Acc)upstream * (reduction == Reduction::mean ? Acc(1) / (Acc)n : Acc(1));
  for (std::size_t i = 0; i < n; ++i) {
    const Acc pv = (Acc)p[i];
    if (pv < (Acc)kBceClamp || pv > Acc(1) - (Acc)kBceClamp) continue;
    const Acc d = (pv - (Acc)y[i]) / (pv * (Acc(1) - pv));
    grad_pred[i] = (T)((Acc)grad_pred[i] + scale * d);
  }
}

}  // namespace lsw
