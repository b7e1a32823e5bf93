#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hoist {

// Dense row-major double tensor, rank 0..4. Rank 0 is a scalar with one
// element. Small enough to pass by value; copies are explicit memcpy cost.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(numel_of(shape_)), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.data_.assign(1, v);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    if (numel_of(shape) != static_cast<int64_t>(values.size()))
      throw std::invalid_argument("Tensor::from: shape/value size mismatch");
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const double& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& operator()(int i) { return data_[static_cast<size_t>(i)]; }
  const double& operator()(int i) const { return data_[static_cast<size_t>(i)]; }

  double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
  const double& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }

  double& operator()(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  const double& operator()(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  double& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const double& operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  bool all_finite() const;

  std::string shape_str() const;

  static int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace hoist
