#include "rankgan/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "rankgan/error.hpp"

namespace rankgan {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " holds " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  return data_.size() / shape_.back();
}

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw UsageError("item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

bool Tensor::is_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                         shape_string(shape));
  }
  shape_ = std::move(shape);
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.storage() == b.storage();
}

}  // namespace rankgan
