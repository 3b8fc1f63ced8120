#include "vqacoin/tensor.hpp"

#include <cmath>
#include <sstream>

#include "vqacoin/error.hpp"

namespace vqacoin {

namespace {
size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) {
    if (d == 0) throw dimension_error("tensor extents must be positive, got " + shape_to_string(shape));
    n *= d;
  }
  return n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<size_t> shape) {
  Tensor t;
  size_t n = shape_numel(shape);
  t.shape_ = std::move(shape);
  t.data_.assign(n, 0.0);
  return t;
}

Tensor Tensor::full(std::vector<size_t> shape, double v) {
  Tensor t = zeros(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> data) {
  size_t n = shape_numel(shape);
  if (n != data.size()) {
    throw dimension_error("data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_to_string(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::vector(std::vector<double> data) {
  size_t n = data.size();
  return from_data({n}, std::move(data));
}

Tensor Tensor::matrix(size_t rows, size_t cols, std::vector<double> data) {
  return from_data({rows, cols}, std::move(data));
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

void Tensor::add_(const Tensor& other) {
  if (!same_shape(other)) {
    throw dimension_error("add_: shape " + shape_str() + " vs " + other.shape_str());
  }
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::scale_(double c) {
  for (double& x : data_) x *= c;
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string shape_to_string(std::span<const size_t> shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

}  // namespace vqacoin
