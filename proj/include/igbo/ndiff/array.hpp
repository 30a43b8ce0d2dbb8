#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace igbo::ndiff {

// Extents of a dense array. Rank is capped at four, which covers every tensor
// in the library (the largest is the T x T x d attribution tensor).
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> extents);
  explicit Shape(std::span<const std::size_t> extents);

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t axis) const { return extents_[axis]; }
  // Product of extents; 1 for rank 0.
  std::size_t size() const;

  bool operator==(const Shape& other) const;
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::vector<std::size_t> to_vector() const;
  std::string str() const;

 private:
  std::array<std::size_t, kMaxRank> extents_{};
  std::size_t rank_ = 0;
};

// Row-major block of doubles. Vectors are stored as rank-2 columns (n x 1)
// and scalars as 1 x 1 so that every tape primitive works on matrices.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array scalar(double value);
  static Array column(std::vector<double> values);
  static Array row(std::vector<double> values);
  static Array matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.rank() > 0 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.rank() > 1 ? shape_[1] : 1; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols() + c];
  }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  // The single value of a one-element array.
  double item() const;
  bool all_finite() const;
  double max_abs() const;

  bool operator==(const Array& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Numeric kernels. The tape primitives in tape.hpp share these names so that
// gradient rules can be written once for plain values and for tape variables.
Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array matmul(const Array& a, const Array& b);
Array transpose(const Array& a);
Array scale(const Array& a, double factor);
Array shift(const Array& a, double offset);
Array neg(const Array& a);
Array tanh(const Array& a);
Array logistic(const Array& a);
Array reciprocal(const Array& a);
Array abs(const Array& a);
Array relu(const Array& a);
Array log(const Array& a);
Array exp(const Array& a);
Array square(const Array& a);
Array sum(const Array& a);
Array broadcast_to(const Array& a, const Shape& shape);
Array concat_rows(std::span<const Array> parts);
Array slice_rows(const Array& a, std::size_t offset, std::size_t count);
Array pad_rows(const Array& a, std::size_t offset, std::size_t total_rows);
Array reshape(const Array& a, const Shape& shape);

// sign(x) with sign(0) = 0, and the indicator 1[x > 0].
Array sign(const Array& a);
Array positive_mask(const Array& a);

}  // namespace igbo::ndiff
