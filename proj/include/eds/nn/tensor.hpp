#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace eds::nn {

// Channel-major layout: values[c * length + i].
struct Shape {
  std::size_t channels = 1;
  std::size_t length = 0;

  constexpr std::size_t size() const { return channels * length; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), values_(shape.size(), 0.0) {}
  Tensor(Shape shape, std::vector<double> values);
  // 1-D tensor with a single channel.
  explicit Tensor(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t channels() const { return shape_.channels; }
  std::size_t length() const { return shape_.length; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t c, std::size_t i) { return values_[c * shape_.length + i]; }
  double at(std::size_t c, std::size_t i) const {
    return values_[c * shape_.length + i];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  bool all_finite() const;

 private:
  Shape shape_{};
  std::vector<double> values_;
};

using Tensor1D = Tensor;
using Tensor2D = Tensor;

}  // namespace eds::nn
