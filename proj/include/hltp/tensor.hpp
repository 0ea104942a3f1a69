#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hltp {

/// Dense row-major tensor of doubles. Rank 1 and 2 cover all runtime math in
/// this project; the generic shape vector exists for serialization.
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    data_.assign(n, 0.0);
  }

  Tensor(std::size_t r, std::size_t c) : Tensor(std::vector<std::size_t>{r, c}) {}

  static Tensor vec(std::size_t n) { return Tensor(std::vector<std::size_t>{n}); }

  static Tensor scalar(double v) {
    Tensor t = vec(1);
    t.data_[0] = v;
    return t;
  }

  static Tensor full(std::size_t r, std::size_t c, double v) {
    Tensor t(r, c);
    t.data_.assign(t.data_.size(), v);
    return t;
  }

  static Tensor full_vec(std::size_t n, double v) {
    Tensor t = vec(n);
    t.data_.assign(n, v);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const {
    if (shape_.size() < 2) return shape_.size() == 1 ? 1 : 0;
    return shape_[1];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  void add_inplace(const Tensor& o) {
    if (!same_shape(o)) throw std::runtime_error("Tensor::add_inplace shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace hltp
