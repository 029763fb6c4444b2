// Copyright 2026 The hyrl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HYRL_GRAD_TENSOR_HPP_
#define HYRL_GRAD_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyrl::grad {

// Dense row-major tensor of doubles. Shapes are explicit; the only implicit
// broadcasting anywhere in the op set is scalar-vs-tensor.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  static Tensor scalar(double v) {
    Tensor t(std::vector<int64_t>{1});
    t.data_[0] = v;
    return t;
  }

  static Tensor from(std::vector<int64_t> shape, std::vector<double> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    if (checked_size(t.shape_) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("Tensor::from: shape/data size mismatch");
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& at2(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double at2(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  static int64_t checked_size(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
      if (n > (int64_t{1} << 40) / d) throw std::invalid_argument("Tensor: too large");
      n *= d;
    }
    return n;
  }

  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace hyrl::grad

#endif  // HYRL_GRAD_TENSOR_HPP_
