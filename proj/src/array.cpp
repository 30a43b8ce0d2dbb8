#include "igbo/ndiff/array.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "igbo/errors.hpp"

namespace igbo::ndiff {

Shape::Shape(std::initializer_list<std::size_t> extents)
    : Shape(std::span<const std::size_t>(extents.begin(), extents.size())) {}

Shape::Shape(std::span<const std::size_t> extents) {
  require(extents.size() <= kMaxRank, "array rank exceeds 4");
  rank_ = extents.size();
  std::copy(extents.begin(), extents.end(), extents_.begin());
}

std::size_t Shape::size() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= extents_[i];
  return n;
}

bool Shape::operator==(const Shape& other) const {
  if (rank_ != other.rank_) return false;
  for (std::size_t i = 0; i < rank_; ++i) {
    if (extents_[i] != other.extents_[i]) return false;
  }
  return true;
}

std::vector<std::size_t> Shape::to_vector() const {
  return {extents_.begin(), extents_.begin() + rank_};
}

std::string Shape::str() const {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) out << "x";
    out << extents_[i];
  }
  out << ")";
  return out.str();
}

Array::Array(Shape shape, double fill)
    : shape_(shape), data_(shape.size(), fill) {}

Array::Array(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  require(data_.size() == shape_.size(),
          "array data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_.str());
}

Array Array::scalar(double value) { return Array(Shape{1, 1}, {value}); }

Array Array::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array(Shape{n, 1}, std::move(values));
}

Array Array::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array(Shape{1, n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols,
                    std::vector<double> values) {
  return Array(Shape{rows, cols}, std::move(values));
}

double Array::item() const {
  require(data_.size() == 1, "item() on array of shape " + shape_.str());
  return data_[0];
}

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Array::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

namespace {

void require_same_shape(const Array& a, const Array& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            a.shape().str() + " vs " + b.shape().str());
  }
}

template <class F>
Array map(const Array& a, F f) {
  Array out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class F>
Array zip(const Array& a, const Array& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Array out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

void require_rank2(const Array& a, const char* op) {
  if (a.shape().rank() != 2) {
    throw ContractViolation(std::string(op) + ": expected a matrix, got " +
                            a.shape().str());
  }
}

}  // namespace

Array add(const Array& a, const Array& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Array sub(const Array& a, const Array& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Array mul(const Array& a, const Array& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Array matmul(const Array& a, const Array& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  if (b.rows() != n) {
    throw ContractViolation("matmul: inner extents differ " + a.shape().str() +
                            " * " + b.shape().str());
  }
  Array out(Shape{m, p});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += aik * b[k * p + j];
    }
  }
  return out;
}

Array transpose(const Array& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Array out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  }
  return out;
}

Array scale(const Array& a, double factor) {
  return map(a, [factor](double x) { return x * factor; });
}

Array shift(const Array& a, double offset) {
  return map(a, [offset](double x) { return x + offset; });
}

Array neg(const Array& a) { return scale(a, -1.0); }

Array tanh(const Array& a) {
  return map(a, [](double x) { return std::tanh(x); });
}

Array logistic(const Array& a) {
  return map(a, [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Array reciprocal(const Array& a) {
  return map(a, [](double x) { return 1.0 / x; });
}

Array abs(const Array& a) {
  return map(a, [](double x) { return std::fabs(x); });
}

Array relu(const Array& a) {
  return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

Array log(const Array& a) {
  return map(a, [](double x) { return std::log(x); });
}

Array exp(const Array& a) {
  return map(a, [](double x) { return std::exp(x); });
}

Array square(const Array& a) {
  return map(a, [](double x) { return x * x; });
}

Array sum(const Array& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Array::scalar(s);
}

Array broadcast_to(const Array& a, const Shape& shape) {
  require(a.size() == 1, "broadcast_to: source must hold one element, got " +
                             a.shape().str());
  return Array(shape, a[0]);
}

Array concat_rows(std::span<const Array> parts) {
  require(!parts.empty(), "concat_rows: no parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Array& p : parts) {
    require_rank2(p, "concat_rows");
    require(p.cols() == cols, "concat_rows: column count mismatch");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Array& p : parts) data.insert(data.end(), p.vec().begin(), p.vec().end());
  return Array(Shape{rows, cols}, std::move(data));
}

Array slice_rows(const Array& a, std::size_t offset, std::size_t count) {
  require_rank2(a, "slice_rows");
  require(offset + count <= a.rows(), "slice_rows: range out of bounds");
  const std::size_t cols = a.cols();
  std::vector<double> data(a.vec().begin() + offset * cols,
                           a.vec().begin() + (offset + count) * cols);
  return Array(Shape{count, cols}, std::move(data));
}

Array pad_rows(const Array& a, std::size_t offset, std::size_t total_rows) {
  require_rank2(a, "pad_rows");
  require(offset + a.rows() <= total_rows, "pad_rows: range out of bounds");
  const std::size_t cols = a.cols();
  Array out(Shape{total_rows, cols});
  std::copy(a.vec().begin(), a.vec().end(), out.values().begin() + offset * cols);
  return out;
}

Array reshape(const Array& a, const Shape& shape) {
  require(shape.size() == a.size(), "reshape: element count mismatch " +
                                        a.shape().str() + " -> " + shape.str());
  return Array(shape, a.vec());
}

Array sign(const Array& a) {
  return map(a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Array positive_mask(const Array& a) {
  return map(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

}  // namespace igbo::ndiff
