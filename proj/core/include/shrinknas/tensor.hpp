#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace shrinknas {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles. The last axis is the channel / feature
/// axis for every operation in this library.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor({}, {value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  /// Size of the last axis (1 for scalars).
  std::size_t channels() const { return shape_.empty() ? 1 : shape_.back(); }
  /// Product of all axes but the last.
  std::size_t rows() const { return channels() == 0 ? 0 : size() / channels(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double item() const;

  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

double l2_norm(const Tensor& t);

}  // namespace shrinknas
