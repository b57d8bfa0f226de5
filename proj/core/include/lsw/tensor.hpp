#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lsw/errors.hpp"
#include "lsw/rng.hpp"

namespace lsw {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major n-dimensional array with an optional same-shape gradient.
// Extents must be positive; product(shape) always equals the value count.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    check_shape(shape_);
    values_.assign(shape_numel(shape_), T(0));
    if (requires_grad_) grad_.assign(values_.size(), T(0));
  }

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : shape_(std::move(shape)),
        values_(std::move(values)),
        requires_grad_(requires_grad) {
    check_shape(shape_);
    if (shape_numel(shape_) != values_.size()) {
      throw ValidationError("tensor shape " + shape_str(shape_) + " implies " +
                            std::to_string(shape_numel(shape_)) +
                            " values, got " + std::to_string(values_.size()));
    }
    if (requires_grad_) grad_.assign(values_.size(), T(0));
  }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    for (auto& v : t.values_) v = value;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_[axis]; }
  std::size_t numel() const { return values_.size(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool requires_grad() const { return requires_grad_; }
  bool has_grad() const { return !grad_.empty(); }

  void set_requires_grad(bool on) {
    requires_grad_ = on;
    if (on) ensure_grad();
  }

  std::span<T> grad() {
    if (grad_.empty()) throw ValidationError("tensor has no gradient storage");
    return grad_;
  }
  std::span<const T> grad() const {
    if (grad_.empty()) throw ValidationError("tensor has no gradient storage");
    return grad_;
  }

  // Allocates zeroed gradient storage if absent.
  void ensure_grad() {
    if (grad_.empty()) grad_.assign(values_.size(), T(0));
  }

  void zero_grad() {
    for (auto& g : grad_) g = T(0);
  }

  bool all_finite() const {
    for (const T& v : values_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw ValidationError("tensor shape must have at least one extent");
    for (std::size_t e : shape) {
      if (e == 0) throw ValidationError("tensor extents must be positive, got " + shape_str(shape));
    }
  }

  Shape shape_;
  std::vector<T> values_;
  std::vector<T> grad_;
  bool requires_grad_ = false;
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T, typename... Args>
TensorPtr<T> make_tensor(Args&&... args) {
  return std::make_shared<Tensor<T>>(std::forward<Args>(args)...);
}

// Normal draws with the given standard deviation, in a fixed element order.
template <typename T>
TensorPtr<T> random_normal(Shape shape, Rng& rng, double stddev, bool requires_grad = false) {
  auto t = make_tensor<T>(std::move(shape), requires_grad);
  for (auto& v : t->values()) v = static_cast<T>(rng.normal() * stddev);
  return t;
}

}  // namespace lsw
