#include "hffn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hffn {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << batch << ',' << channels << ',' << height << ',' << width << ')';
  return os.str();
}

namespace {

void check_dims(const Shape& s) {
  if (s.batch < 1 || s.channels < 1 || s.height < 1 || s.width < 1) {
    throw ShapeError("tensor: all dimensions must be >= 1, got " + s.str());
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  check_dims(shape_);
  data_.assign(shape_.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("tensor: item() on non-scalar shape " + shape_.str());
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::require_finite(const char* where) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      std::ostringstream os;
      os << where << ": non-finite value " << data_[i] << " at flat index " << i << " of "
         << shape_.str();
      throw NumericError(os.str());
    }
  }
}

void require_shape(bool ok, const std::string& op, const std::string& message) {
  if (!ok) throw ShapeError(op + ": " + message);
}

double dot(const Tensor& a, const Tensor& b) {
  require_shape(a.shape() == b.shape(), "dot",
                "shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_shape(a.shape() == b.shape(), "max_abs_diff",
                "shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace hffn
