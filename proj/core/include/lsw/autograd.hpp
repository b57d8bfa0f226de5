#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "lsw/ops.hpp"
#include "lsw/tensor.hpp"

// Reverse-mode differentiation. Ops are recorded onto a tape as they run;
// backward() replays the tape in exact reverse order, accumulating into the
// grad storage of every tensor that requires one. Passing a null tape (or
// inputs that don't require grad) runs the plain forward kernel.
//
// A tape is single-owner: record and backward on one logical thread.

namespace lsw {

template <typename T>
struct LossValue;
template <typename T>
class Tape;
template <typename T>
void backward(const LossValue<T>& loss, Tape<T>& tape);

template <typename T>
struct TapeOp {
  const char* name;
  std::vector<TensorPtr<T>> inputs;
  TensorPtr<T> output;
  std::function<void()> backward;
};

template <typename T>
class Tape {
 public:
  void record(const char* name, std::vector<TensorPtr<T>> inputs, TensorPtr<T> output,
              std::function<void()> backward_fn) {
    ops_.push_back(TapeOp<T>{name, std::move(inputs), std::move(output), std::move(backward_fn)});
  }

  const std::vector<TapeOp<T>>& ops() const { return ops_; }
  std::size_t size() const { return ops_.size(); }
  void clear() {
    ops_.clear();
    visit_log_.clear();
  }

  // Names in the order the last backward() visited them.
  const std::vector<const char*>& visit_log() const { return visit_log_; }

  friend void backward<T>(const LossValue<T>& loss, Tape<T>& tape);

 private:
  std::vector<TapeOp<T>> ops_;
  std::vector<const char*> visit_log_;
};

template <typename T>
struct LossValue {
  TensorPtr<T> value;  // scalar tensor, shape [1]
  Reduction reduction = Reduction::mean;

  T scalar() const { return value->values()[0]; }
};

namespace detail {

template <typename T>
std::span<T> grad_or_empty(const TensorPtr<T>& t) {
  return t->requires_grad() ? t->grad() : std::span<T>{};
}

}  // namespace detail

// ---- op wrappers ----------------------------------------------------------

template <typename T>
TensorPtr<T> conv3d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& kernel,
                    const TensorPtr<T>& bias, Dim3 stride, Dim3 pad) {
  auto out = make_tensor<T>(conv3d_forward(*input, *kernel, *bias, stride, pad));
  if (tape && (input->requires_grad() || kernel->requires_grad() || bias->requires_grad())) {
    out->set_requires_grad(true);
    tape->record("conv3d", {input, kernel, bias}, out, [input, kernel, bias, out, stride, pad] {
      conv3d_backward<T>(*input, *kernel, stride, pad, out->grad(),
                         detail::grad_or_empty(input), detail::grad_or_empty(kernel),
                         detail::grad_or_empty(bias));
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> maxpool3d(Tape<T>* tape, const TensorPtr<T>& input, Dim3 window, Dim3 stride) {
  const bool track = tape && input->requires_grad();
  auto argmax = track ? std::make_shared<std::vector<std::size_t>>() : nullptr;
  auto out = make_tensor<T>(maxpool3d_forward(*input, window, stride, argmax.get()));
  if (track) {
    out->set_requires_grad(true);
    tape->record("maxpool3d", {input}, out, [input, out, argmax] {
      maxpool3d_backward<T>(out->grad(), *argmax, input->grad());
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> affine(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weight,
                    const TensorPtr<T>& bias) {
  auto out = make_tensor<T>(affine_forward(*input, *weight, *bias));
  if (tape && (input->requires_grad() || weight->requires_grad() || bias->requires_grad())) {
    out->set_requires_grad(true);
    tape->record("affine", {input, weight, bias}, out, [input, weight, bias, out] {
      affine_backward<T>(*input, *weight, out->grad(), detail::grad_or_empty(input),
                         detail::grad_or_empty(weight), detail::grad_or_empty(bias));
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> pointwise(Tape<T>* tape, const TensorPtr<T>& input, Activation kind) {
  auto out = make_tensor<T>(pointwise_forward(*input, kind));
  if (tape && input->requires_grad()) {
    out->set_requires_grad(true);
    const char* name = kind == Activation::relu ? "relu" : "sigmoid";
    tape->record(name, {input}, out, [input, out, kind] {
      pointwise_backward<T>(*input, *out, kind, out->grad(), input->grad());
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> relu(Tape<T>* tape, const TensorPtr<T>& input) {
  return pointwise(tape, input, Activation::relu);
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>* tape, const TensorPtr<T>& input) {
  return pointwise(tape, input, Activation::sigmoid);
}

template <typename T>
TensorPtr<T> global_avg_pool(Tape<T>* tape, const TensorPtr<T>& input) {
  auto out = make_tensor<T>(global_avg_pool_forward(*input));
  if (tape && input->requires_grad()) {
    out->set_requires_grad(true);
    tape->record("global_avg_pool", {input}, out, [input, out] {
      global_avg_pool_backward<T>(input->shape(), out->grad(), input->grad());
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> reshape(Tape<T>* tape, const TensorPtr<T>& input, Shape shape) {
  if (shape_numel(shape) != input->numel()) {
    throw ValidationError("reshape: target shape " + shape_str(shape) + " has " +
                          std::to_string(shape_numel(shape)) + " elements, tensor has " +
                          std::to_string(input->numel()));
  }
  auto out = make_tensor<T>(std::move(shape),
                            std::vector<T>(input->values().begin(), input->values().end()));
  if (tape && input->requires_grad()) {
    out->set_requires_grad(true);
    tape->record("reshape", {input}, out, [input, out] {
      auto go = out->grad();
      auto gi = input->grad();
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
    });
  }
  return out;
}

// Reduce every element to one scalar (sum or mean).
template <typename T>
LossValue<T> reduce(Tape<T>* tape, const TensorPtr<T>& input, Reduction reduction) {
  using Acc = acc_t<T>;
  Acc s = 0;
  for (const T& v : input->values()) s += (Acc)v;
  if (reduction == Reduction::mean) s /= (Acc)input->numel();
  auto out = make_tensor<T>(Shape{1}, std::vector<T>{(T)s});
  if (tape && input->requires_grad()) {
    out->set_requires_grad(true);
    const char* name = reduction == Reduction::mean ? "reduce_mean" : "reduce_sum";
    tape->record(name, {input}, out, [input, out, reduction] {
      const Acc share = (Acc)out->grad()[0] *
                        (reduction == Reduction::mean ? Acc(1) / (Acc)input->numel() : Acc(1));
      for (T& g : input->grad()) g = (T)((Acc)g + share);
    });
  }
  return LossValue<T>{out, reduction};
}

template <typename T>
LossValue<T> bce_loss(Tape<T>* tape, const TensorPtr<T>& pred, const TensorPtr<T>& label,
                      Reduction reduction) {
  const T v = bce_forward(*pred, *label, reduction);
  auto out = make_tensor<T>(Shape{1}, std::vector<T>{v});
  if (tape && pred->requires_grad()) {
    out->set_requires_grad(true);
    tape->record("bce_loss", {pred, label}, out, [pred, label, out, reduction] {
      bce_backward<T>(*pred, *label, reduction, out->grad()[0], pred->grad());
    });
  }
  return LossValue<T>{out, reduction};
}

// ---- backward -------------------------------------------------------------

template <typename T>
void backward(const LossValue<T>& loss, Tape<T>& tape) {
  if (!loss.value || loss.value->numel() != 1) {
    throw ValidationError("backward: loss must be a scalar, got shape " +
                          (loss.value ? shape_str(loss.value->shape()) : std::string("<null>")));
  }
  std::size_t producer = tape.ops_.size();
  for (std::size_t i = tape.ops_.size(); i-- > 0;) {
    if (tape.ops_[i].output == loss.value) {
      producer = i;
      break;
    }
  }
  if (producer == tape.ops_.size()) {
    throw ValidationError("backward: loss tensor was not produced on this tape");
  }
  tape.visit_log_.clear();
  loss.value->ensure_grad();
  loss.value->grad()[0] = T(1);
  for (std::size_t i = producer + 1; i-- > 0;) {
    tape.visit_log_.push_back(tape.ops_[i].name);
    tape.ops_[i].backward();
  }
}

}  // namespace lsw
