#include "evuq/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace evuq::ad {
namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
  if (shape_.size() > 2) throw ShapeError("tensor rank above 2 is unsupported");
}

Tensor::Tensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 2) throw ShapeError("tensor rank above 2 is unsupported");
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("shape " + to_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::scalar(Real value) { return Tensor(Shape{}, value); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor(Shape{rows, cols}, Real{0});
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, Real value) {
  return Tensor(Shape{rows, cols}, value);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<Real> values) {
  return Tensor(Shape{rows, cols}, std::vector<Real>(values));
}

std::size_t Tensor::rows() const {
  return shape_.size() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

Real Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Real v) { return std::isfinite(v); });
}

Tensor Tensor::rows_slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows()) throw ShapeError("row slice out of range");
  const std::size_t c = cols();
  std::vector<Real> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                        data_.begin() + static_cast<std::ptrdiff_t>(end * c));
  return Tensor(Shape{end - begin, c}, std::move(out));
}

}  // namespace evuq::ad
