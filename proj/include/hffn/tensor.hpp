#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hffn {

/// Shape of a dense NCHW feature map.
struct Shape {
  int batch = 1;
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(batch) * channels * height * width;
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Thrown for any violated tensor-level precondition (shape mismatch, bad
/// arguments). Messages always carry the operation name.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense 4-D tensor, row-major NCHW with width fastest.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0); }
  static Tensor scalar(double v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  int batch() const { return shape_.batch; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  std::size_t index(int b, int c, int h, int w) const {
    return ((static_cast<std::size_t>(b) * shape_.channels + c) * shape_.height + h) *
               shape_.width +
           w;
  }
  double& at(int b, int c, int h, int w) { return data_[index(b, c, h, w)]; }
  double at(int b, int c, int h, int w) const { return data_[index(b, c, h, w)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Pointer to the start of plane (b, c).
  double* plane(int b, int c) { return data_.data() + index(b, c, 0, 0); }
  const double* plane(int b, int c) const { return data_.data() + index(b, c, 0, 0); }

  /// Value of a (1,1,1,1) tensor.
  double item() const;

  bool all_finite() const;
  /// Throws NumericError naming `where` if any element is NaN or Inf.
  void require_finite(const char* where) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

void require_shape(bool ok, const std::string& op, const std::string& message);

/// Sum of elementwise products; shapes must match.
double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace hffn
