#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "leaflite/error.hpp"

namespace leaflite {

// Up to four extents. Rank-4 tensors are laid out (batch, height, width,
// channels) with channels innermost.
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<int> dims);
  explicit Shape(std::span<const int> dims);

  int rank() const noexcept { return rank_; }
  int operator[](int axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
  std::size_t numel() const noexcept;
  std::span<const int> dims() const noexcept {
    return {dims_.data(), static_cast<std::size_t>(rank_)};
  }
  std::string str() const;

  friend bool operator==(const Shape& a, const Shape& b) noexcept {
    if (a.rank_ != b.rank_) return false;
    for (int i = 0; i < a.rank_; ++i) {
      if (a.dims_[static_cast<std::size_t>(i)] != b.dims_[static_cast<std::size_t>(i)]) return false;
    }
    return true;
  }

 private:
  std::array<int, kMaxRank> dims_{};
  int rank_ = 0;
};

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(shape), data_(shape.numel(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return shape_.rank(); }
  int dim(int axis) const { return shape_[axis]; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-4 element access.
  T& at(int n, int h, int w, int c) { return data_[offset(n, h, w, c)]; }
  const T& at(int n, int h, int w, int c) const { return data_[offset(n, h, w, c)]; }

  // Rank-2 element access.
  T& at(int row, int col) {
    return data_[static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_[1]) +
                 static_cast<std::size_t>(col)];
  }
  const T& at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_[1]) +
                 static_cast<std::size_t>(col)];
  }

  // Same data, new extents; element count must match.
  BasicTensor reshaped(Shape shape) const& {
    return BasicTensor(shape, data_);
  }
  BasicTensor reshaped(Shape shape) && {
    return BasicTensor(shape, std::move(data_));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(int n, int h, int w, int c) const {
    return ((static_cast<std::size_t>(n) * static_cast<std::size_t>(shape_[1]) +
             static_cast<std::size_t>(h)) *
                static_cast<std::size_t>(shape_[2]) +
            static_cast<std::size_t>(w)) *
               static_cast<std::size_t>(shape_[3]) +
           static_cast<std::size_t>(c);
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

// True when every element is finite.
template <typename T>
bool all_finite(const BasicTensor<T>& t);

}  // namespace leaflite
