#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vqacoin {

/// Dense row-major array of doubles, rank 0..2. Plain value type: gradient
/// tracking lives in autograd.hpp, on top of this.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape);
  static Tensor full(std::vector<size_t> shape, double v);
  static Tensor from_data(std::vector<size_t> shape, std::vector<double> data);
  static Tensor scalar(double v) { return from_data({1}, {v}); }
  static Tensor vector(std::vector<double> data);
  static Tensor matrix(size_t rows, size_t cols, std::vector<double> data);

  bool defined() const { return !shape_.empty(); }
  size_t rank() const { return shape_.size(); }
  size_t numel() const { return data_.size(); }
  size_t dim(size_t axis) const { return shape_.at(axis); }
  size_t rows() const { return dim(0); }
  size_t cols() const { return dim(1); }
  const std::vector<size_t>& shape() const { return shape_; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const double* ptr() const { return data_.data(); }
  double* ptr() { return data_.data(); }

  double at(size_t i) const { return data_[i]; }
  double& at(size_t i) { return data_[i]; }
  double at(size_t r, size_t c) const { return data_[r * cols() + c]; }
  double& at(size_t r, size_t c) { return data_[r * cols() + c]; }

  void fill(double v);
  /// Elementwise `this += other`; shapes must already match.
  void add_(const Tensor& other);
  void scale_(double c);

  bool all_finite() const;

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

std::string shape_to_string(std::span<const size_t> shape);

}  // namespace vqacoin
