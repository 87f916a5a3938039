#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "advx/errors.hpp"

namespace advx {

using Index = Eigen::Index;

/// Project-wide floating point type for activations and parameters.
using Real = float;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Extents of a tensor of rank 0..4, outermost first (N, C, H, W).
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<Index> dims) {
    if (dims.size() > kMaxRank) throw ConfigError("Shape: rank above 4");
    for (Index d : dims) {
      if (d < 0) throw ConfigError("Shape: negative extent");
      dims_[rank_++] = d;
    }
  }

  int rank() const { return rank_; }
  Index operator[](int i) const { return dims_[i]; }

  Index numel() const {
    Index n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }

  /// Same extents with the leading (batch) dimension replaced.
  Shape with_batch(Index n) const {
    Shape s = *this;
    s.dims_[0] = n;
    return s;
  }

  /// Shape of one batch element: drops the leading extent.
  Shape tail() const {
    Shape s;
    for (int i = 1; i < rank_; ++i) s.dims_[s.rank_++] = dims_[i];
    return s;
  }

  /// Prepends a batch extent.
  Shape batched(Index n) const {
    if (rank_ == kMaxRank) throw ConfigError("Shape: cannot add batch to rank-4 shape");
    Shape s;
    s.dims_[s.rank_++] = n;
    for (int i = 0; i < rank_; ++i) s.dims_[s.rank_++] = dims_[i];
    return s;
  }

  friend bool operator==(const Shape& a, const Shape& b) {
    if (a.rank_ != b.rank_) return false;
    for (int i = 0; i < a.rank_; ++i)
      if (a.dims_[i] != b.dims_[i]) return false;
    return true;
  }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rank_; ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

 private:
  std::array<Index, kMaxRank> dims_{};
  int rank_ = 0;
};

/// Dense row-major tensor of up to rank 4.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Storage = Vector<Scalar>;

  Tensor() = default;
  explicit Tensor(const Shape& shape) : shape_(shape), data_(Storage::Zero(shape.numel())) {}
  Tensor(const Shape& shape, Storage data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw ConfigError("Tensor: data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_.str());
  }

  static Tensor constant(const Shape& shape, Scalar value) {
    return Tensor(shape, Storage::Constant(shape.numel(), value));
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  Index dim(int i) const { return shape_[i]; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Storage& values() { return data_; }
  const Storage& values() const { return data_; }

  /// Changes the shape; storage is reused when the element count is unchanged.
  void resize(const Shape& shape) {
    shape_ = shape;
    if (data_.size() != shape.numel()) data_.resize(shape.numel());
  }

  /// Reinterprets the same elements under another shape of equal size.
  void reshape(const Shape& shape) {
    if (shape.numel() != data_.size())
      throw ConfigError("Tensor::reshape: " + shape_.str() + " -> " + shape.str());
    shape_ = shape;
  }

  void set_zero() { data_.setZero(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index n, Index c, Index h, Index w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar operator()(Index n, Index c, Index h, Index w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Row-major matrix view over the whole buffer.
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    return {data_.data(), rows, cols};
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

 private:
  Shape shape_;
  Storage data_;
};

/// Learnable tensor together with its accumulated gradient.
template <typename Scalar>
class Parameter {
 public:
  Parameter() = default;
  explicit Parameter(Tensor<Scalar> value)
      : value_(std::move(value)), grad_(value_.shape()) {}

  const Tensor<Scalar>& value() const { return value_; }
  const Tensor<Scalar>& grad() const { return grad_; }
  const Shape& shape() const { return value_.shape(); }

  /// Element access that cannot change the shape.
  Eigen::Map<Vector<Scalar>> values() { return {value_.data(), value_.size()}; }
  Eigen::Map<Vector<Scalar>> grads() { return {grad_.data(), grad_.size()}; }

  void zero_grad() { grad_.set_zero(); }

 private:
  Tensor<Scalar> value_;
  Tensor<Scalar> grad_;
};

template <typename Scalar>
void require_finite(const Tensor<Scalar>& t, std::string_view what) {
  if (!t.all_finite()) throw NumericError("non-finite value in " + std::string(what));
}

}  // namespace advx
