#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace yolocam {

/// Error type thrown by every operation in this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_string(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

/// Dense rank-<=4 tensor, row-major flat storage, channels-first layout
/// (CxHxW for feature maps, OxIxKhxKw for convolution kernels).
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_size(shape_), Scalar(0));
  }

  Tensor(std::vector<int> shape, std::vector<Scalar> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<std::int64_t>(data_.size()) != checked_size(shape_)) {
      throw Error("tensor: " + std::to_string(data_.size()) +
                  " values do not fill shape " + shape_string(shape_));
    }
  }

  static Tensor full(std::vector<int> shape, Scalar v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::vector<Scalar>& values() { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  Scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const Scalar& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  Scalar& at(int y, int x) { return data_[idx2(y, x)]; }
  const Scalar& at(int y, int x) const { return data_[idx2(y, x)]; }
  Scalar& at(int c, int y, int x) { return data_[idx3(c, y, x)]; }
  const Scalar& at(int c, int y, int x) const { return data_[idx3(c, y, x)]; }
  Scalar& at(int o, int i, int ky, int kx) { return data_[idx4(o, i, ky, kx)]; }
  const Scalar& at(int o, int i, int ky, int kx) const { return data_[idx4(o, i, ky, kx)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::int64_t checked_size(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4) {
      throw Error("tensor: rank must be 1..4, got shape " + shape_string(shape));
    }
    std::int64_t n = 1;
    for (int e : shape) {
      if (e < 1) throw Error("tensor: extents must be >= 1, got shape " + shape_string(shape));
      n *= e;
    }
    return n;
  }

  std::size_t idx2(int y, int x) const {
    return static_cast<std::size_t>(y) * shape_[1] + x;
  }
  std::size_t idx3(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x;
  }
  std::size_t idx4(int o, int i, int ky, int kx) const {
    return ((static_cast<std::size_t>(o) * shape_[1] + i) * shape_[2] + ky) * shape_[3] + kx;
  }

  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

using Tensorf = Tensor<float>;

template <typename Scalar>
Scalar min_value(const Tensor<Scalar>& t) {
  Scalar m = t[0];
  for (std::int64_t i = 1; i < t.size(); ++i) m = t[i] < m ? t[i] : m;
  return m;
}

template <typename Scalar>
Scalar max_value(const Tensor<Scalar>& t) {
  Scalar m = t[0];
  for (std::int64_t i = 1; i < t.size(); ++i) m = t[i] > m ? t[i] : m;
  return m;
}

}  // namespace yolocam
