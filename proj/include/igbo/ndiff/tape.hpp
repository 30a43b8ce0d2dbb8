#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "igbo/ndiff/array.hpp"

namespace igbo::ndiff {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }

  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }

 private:
  friend class Tape;
  friend struct GraphMode;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class Op : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kMatMul,
  kTranspose,
  kScale,
  kShift,
  kTanh,
  kLogistic,
  kReciprocal,
  kAbs,
  kRelu,
  kLog,
  kExp,
  kSquare,
  kSum,
  kBroadcast,
  kConcat,
  kSliceRows,
  kPadRows,
  kReshape,
};

const char* op_name(Op op);

// Per-node attributes: a scalar for scale/shift, a row offset for slicing,
// a target shape for broadcast/reshape/pad.
struct NodeExtra {
  double scalar = 0.0;
  std::size_t offset = 0;
  Shape shape;
};

// Records array-valued primitives in creation order. Because operands always
// precede their results, descending id order is a topological order of the
// graph, and reverse passes replay it without sorting.
//
// Gradients come in two flavours: gradient_values() returns plain arrays,
// gradient() records the adjoint computation on this same tape so the result
// can be differentiated again.
//
// A Tape is not thread-safe; use one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Array value);
  Var constant(Array value);

  const Array& value(Var v) const { return nodes_[v.id()].value; }
  std::size_t size() const { return nodes_.size(); }

  std::vector<Var> gradient(Var root, std::span<const Var> wrt);
  std::vector<Var> gradient(Var root, std::span<const Var> wrt, Var seed);
  std::vector<Array> gradient_values(Var root, std::span<const Var> wrt);
  std::vector<Array> gradient_values(Var root, std::span<const Var> wrt,
                                     const Array& seed);

  // Number of nodes whose adjoint was propagated by the last reverse pass.
  std::size_t last_visit_count() const { return last_visits_; }

  // Low-level recording hook used by the primitive functions below.
  using Extra = NodeExtra;
  Var record(Op op, Array value, std::initializer_list<Var> parents,
             Extra extra = {});
  Var record(Op op, Array value, std::span<const Var> parents, Extra extra);

 private:
  struct Node {
    Op op = Op::kLeaf;
    Array value;
    std::vector<std::uint32_t> parents;
    Extra extra;
  };

  template <class Mode>
  auto backward(Var root, std::span<const Var> wrt, typename Mode::Value seed,
                Mode& mode);
  template <class Mode>
  void propagate(std::uint32_t id, const typename Mode::Value& g,
                 const std::vector<char>& needed, Mode& mode);

  friend struct ValueMode;
  friend struct GraphMode;

  std::deque<Node> nodes_;
  std::size_t last_visits_ = 0;
};

inline const Array& Var::value() const { return tape_->value(*this); }

// Primitives. Binary operations require equal shapes, except that a 1 x 1
// operand is broadcast against the other one.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var neg(Var a);
Var tanh(Var a);
Var logistic(Var a);
Var reciprocal(Var a);
Var abs(Var a);
Var relu(Var a);
Var log(Var a);
Var exp(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var broadcast_to(Var a, const Shape& shape);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t offset, std::size_t count);
Var pad_rows(Var a, std::size_t offset, std::size_t total_rows);
Var reshape(Var a, const Shape& shape);
Var dot(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return shift(a, c); }
inline Var operator+(double c, Var a) { return shift(a, c); }
inline Var operator-(Var a, double c) { return shift(a, -c); }

// Gradient of a scalar-valued function at `at`, evaluated on a private tape.
Array grad(const std::function<Var(Var)>& f, const Array& at);
// Differentiable gradient of f at the tape variable `at` (nested use).
Var grad(const std::function<Var(Var)>& f, Var at);
// Evaluates a tape expression numerically.
double evaluate(const std::function<Var(Var)>& f, const Array& at);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Array finite_diff(const std::function<double(const Array&)>& f,
                  const Array& at, double h);

}  // namespace igbo::ndiff
