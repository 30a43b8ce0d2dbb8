#include "igbo/ndiff/tape.hpp"

#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "igbo/errors.hpp"

namespace igbo::ndiff {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kTanh: return "tanh";
    case Op::kLogistic: return "logistic";
    case Op::kReciprocal: return "reciprocal";
    case Op::kAbs: return "abs";
    case Op::kRelu: return "relu";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kSquare: return "square";
    case Op::kSum: return "sum";
    case Op::kBroadcast: return "broadcast_to";
    case Op::kConcat: return "concat_rows";
    case Op::kSliceRows: return "slice_rows";
    case Op::kPadRows: return "pad_rows";
    case Op::kReshape: return "reshape";
  }
  return "unknown";
}

Var Tape::leaf(Array value) { return record(Op::kLeaf, std::move(value), {}); }

Var Tape::constant(Array value) {
  return record(Op::kConstant, std::move(value), {});
}

Var Tape::record(Op op, Array value, std::initializer_list<Var> parents,
                 Extra extra) {
  return record(op, std::move(value),
                std::span<const Var>(parents.begin(), parents.size()),
                std::move(extra));
}

Var Tape::record(Op op, Array value, std::span<const Var> parents,
                 Extra extra) {
  if (!value.all_finite()) {
    throw NumericalError(std::string("numerical overflow in ") + op_name(op));
  }
  require(nodes_.size() < std::numeric_limits<std::uint32_t>::max(),
          "tape is full");
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.parents.reserve(parents.size());
  for (Var p : parents) {
    require(p.tape() == this, "operand recorded on a different tape");
    node.parents.push_back(p.id());
  }
  node.extra = std::move(extra);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

// Reverse-pass strategies. ValueMode accumulates plain arrays; GraphMode
// records every adjoint operation on the tape itself.
struct ValueMode {
  using Value = Array;
  Tape& tape;
  std::vector<std::optional<Array>> adjoint;

  const Array& in(std::uint32_t id) const { return tape.nodes_[id].value; }
  Array lift(Array a) const { return a; }
  Array zeros(const Shape& s) const { return Array(s); }

  void accumulate(std::uint32_t id, Array contribution, Op op) {
    if (!contribution.all_finite()) {
      throw NumericalError(std::string("numerical overflow in gradient of ") +
                           op_name(op));
    }
    auto& slot = adjoint[id];
    if (!slot) {
      slot = std::move(contribution);
      return;
    }
    auto dst = slot->values();
    auto src = contribution.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
};

struct GraphMode {
  using Value = Var;
  Tape& tape;
  std::vector<std::optional<Var>> adjoint;

  Var in(std::uint32_t id) const { return Var(&tape, id); }
  Var lift(Array a) const { return tape.constant(std::move(a)); }
  Var zeros(const Shape& s) const { return tape.constant(Array(s)); }

  void accumulate(std::uint32_t id, Var contribution, Op) {
    auto& slot = adjoint[id];
    slot = slot ? add(*slot, contribution) : contribution;
  }
};

template <class Mode>
void Tape::propagate(std::uint32_t id, const typename Mode::Value& g,
                     const std::vector<char>& needed, Mode& mode) {
  // Deque elements keep their address while GraphMode appends nodes.
  const Node& n = nodes_[id];
  auto need = [&](std::size_t slot) { return needed[n.parents[slot]] != 0; };
  auto emit = [&](std::size_t slot, typename Mode::Value contribution) {
    mode.accumulate(n.parents[slot], std::move(contribution), n.op);
  };
  auto raw = [&](std::size_t slot) -> const Array& {
    return nodes_[n.parents[slot]].value;
  };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      return;
    case Op::kAdd:
      if (need(0)) emit(0, g);
      if (need(1)) emit(1, g);
      return;
    case Op::kSub:
      if (need(0)) emit(0, g);
      if (need(1)) emit(1, neg(g));
      return;
    case Op::kMul: {
      if (need(0)) emit(0, mul(g, mode.in(n.parents[1])));
      if (need(1)) emit(1, mul(g, mode.in(n.parents[0])));
      return;
    }
    case Op::kMatMul: {
      if (need(0)) emit(0, matmul(g, transpose(mode.in(n.parents[1]))));
      if (need(1)) emit(1, matmul(transpose(mode.in(n.parents[0])), g));
      return;
    }
    case Op::kTranspose:
      emit(0, transpose(g));
      return;
    case Op::kScale:
      emit(0, scale(g, n.extra.scalar));
      return;
    case Op::kShift:
      emit(0, g);
      return;
    case Op::kTanh: {
      decltype(auto) y = mode.in(id);
      emit(0, mul(g, shift(neg(square(y)), 1.0)));
      return;
    }
    case Op::kLogistic: {
      decltype(auto) y = mode.in(id);
      emit(0, mul(g, mul(y, shift(neg(y), 1.0))));
      return;
    }
    case Op::kReciprocal: {
      decltype(auto) y = mode.in(id);
      emit(0, mul(g, neg(square(y))));
      return;
    }
    case Op::kAbs:
      // Subgradient 0 at the kink.
      emit(0, mul(g, mode.lift(sign(raw(0)))));
      return;
    case Op::kRelu:
      emit(0, mul(g, mode.lift(positive_mask(raw(0)))));
      return;
    case Op::kLog:
      emit(0, mul(g, reciprocal(mode.in(n.parents[0]))));
      return;
    case Op::kExp:
      emit(0, mul(g, mode.in(id)));
      return;
    case Op::kSquare:
      emit(0, mul(g, scale(mode.in(n.parents[0]), 2.0)));
      return;
    case Op::kSum:
      emit(0, broadcast_to(g, raw(0).shape()));
      return;
    case Op::kBroadcast:
      emit(0, sum(g));
      return;
    case Op::kConcat: {
      std::size_t offset = 0;
      for (std::size_t slot = 0; slot < n.parents.size(); ++slot) {
        const std::size_t rows = raw(slot).rows();
        if (need(slot)) emit(slot, slice_rows(g, offset, rows));
        offset += rows;
      }
      return;
    }
    case Op::kSliceRows:
      emit(0, pad_rows(g, n.extra.offset, raw(0).rows()));
      return;
    case Op::kPadRows:
      emit(0, slice_rows(g, n.extra.offset, raw(0).rows()));
      return;
    case Op::kReshape:
      emit(0, reshape(g, raw(0).shape()));
      return;
  }
}

template <class Mode>
auto Tape::backward(Var root, std::span<const Var> wrt,
                    typename Mode::Value seed, Mode& mode) {
  require(root.tape() == this, "gradient root recorded on a different tape");
  const std::uint32_t r = root.id();

  // needed[i]: node i is a wrt target or depends on one.
  std::vector<char> needed(r + 1, 0);
  std::vector<char> is_target(r + 1, 0);
  for (Var w : wrt) {
    require(w.tape() == this, "gradient target recorded on a different tape");
    if (w.id() <= r) needed[w.id()] = is_target[w.id()] = 1;
  }
  for (std::uint32_t i = 0; i <= r; ++i) {
    if (needed[i]) continue;
    for (std::uint32_t p : nodes_[i].parents) {
      if (needed[p]) {
        needed[i] = 1;
        break;
      }
    }
  }

  mode.adjoint.assign(r + 1, std::nullopt);
  if (needed[r]) mode.adjoint[r] = std::move(seed);

  last_visits_ = 0;
  for (std::uint32_t i = r + 1; i-- > 0;) {
    if (!mode.adjoint[i]) continue;
    ++last_visits_;
    if (is_target[i]) {
      propagate(i, *mode.adjoint[i], needed, mode);
    } else {
      typename Mode::Value g = std::move(*mode.adjoint[i]);
      mode.adjoint[i].reset();
      propagate(i, g, needed, mode);
    }
  }

  std::vector<typename Mode::Value> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    if (w.id() <= r && mode.adjoint[w.id()]) {
      out.push_back(*mode.adjoint[w.id()]);
    } else {
      out.push_back(mode.zeros(w.shape()));
    }
  }
  return out;
}

std::vector<Var> Tape::gradient(Var root, std::span<const Var> wrt) {
  require(root.value().size() == 1,
          "gradient() needs a scalar root; pass a seed otherwise");
  return gradient(root, wrt, constant(Array(root.shape(), 1.0)));
}

std::vector<Var> Tape::gradient(Var root, std::span<const Var> wrt, Var seed) {
  require(seed.shape() == root.shape(), "seed shape must match root shape");
  GraphMode mode{*this, {}};
  return backward(root, wrt, seed, mode);
}

std::vector<Array> Tape::gradient_values(Var root, std::span<const Var> wrt) {
  require(root.value().size() == 1,
          "gradient_values() needs a scalar root; pass a seed otherwise");
  return gradient_values(root, wrt, Array(root.shape(), 1.0));
}

std::vector<Array> Tape::gradient_values(Var root, std::span<const Var> wrt,
                                         const Array& seed) {
  require(seed.shape() == root.shape(), "seed shape must match root shape");
  ValueMode mode{*this, {}};
  return backward(root, wrt, seed, mode);
}

namespace {

Tape& tape_of(Var a) {
  require(a.valid(), "operation on an unbound variable");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  require(b.valid() && b.tape() == &t, "operands recorded on different tapes");
  return t;
}

// Inserts an explicit broadcast node when one side is 1 x 1.
std::pair<Var, Var> align(Var a, Var b, const char* op) {
  if (a.shape() == b.shape()) return {a, b};
  if (a.value().size() == 1) return {broadcast_to(a, b.shape()), b};
  if (b.value().size() == 1) return {a, broadcast_to(b, a.shape())};
  throw ContractViolation(std::string(op) + ": shape mismatch " +
                          a.shape().str() + " vs " + b.shape().str());
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  auto [x, y] = align(a, b, "add");
  return t.record(Op::kAdd, add(x.value(), y.value()), {x, y});
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  auto [x, y] = align(a, b, "sub");
  return t.record(Op::kSub, sub(x.value(), y.value()), {x, y});
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  auto [x, y] = align(a, b, "mul");
  return t.record(Op::kMul, mul(x.value(), y.value()), {x, y});
}

Var matmul(Var a, Var b) {
  return tape_of(a, b).record(Op::kMatMul, matmul(a.value(), b.value()), {a, b});
}

Var transpose(Var a) {
  return tape_of(a).record(Op::kTranspose, transpose(a.value()), {a});
}

Var scale(Var a, double factor) {
  return tape_of(a).record(Op::kScale, scale(a.value(), factor), {a},
                           {.scalar = factor, .offset = 0, .shape = {}});
}

Var shift(Var a, double offset) {
  return tape_of(a).record(Op::kShift, shift(a.value(), offset), {a},
                           {.scalar = offset, .offset = 0, .shape = {}});
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh(Var a) { return tape_of(a).record(Op::kTanh, tanh(a.value()), {a}); }

Var logistic(Var a) {
  return tape_of(a).record(Op::kLogistic, logistic(a.value()), {a});
}

Var reciprocal(Var a) {
  return tape_of(a).record(Op::kReciprocal, reciprocal(a.value()), {a});
}

Var abs(Var a) { return tape_of(a).record(Op::kAbs, abs(a.value()), {a}); }

Var relu(Var a) { return tape_of(a).record(Op::kRelu, relu(a.value()), {a}); }

Var log(Var a) { return tape_of(a).record(Op::kLog, log(a.value()), {a}); }

Var exp(Var a) { return tape_of(a).record(Op::kExp, exp(a.value()), {a}); }

Var square(Var a) {
  return tape_of(a).record(Op::kSquare, square(a.value()), {a});
}

Var sum(Var a) { return tape_of(a).record(Op::kSum, sum(a.value()), {a}); }

Var mean(Var a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var broadcast_to(Var a, const Shape& shape) {
  return tape_of(a).record(Op::kBroadcast, broadcast_to(a.value(), shape), {a},
                           {.scalar = 0.0, .offset = 0, .shape = shape});
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no parts");
  Tape& t = tape_of(parts.front());
  std::vector<Array> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(p.value());
  return t.record(Op::kConcat, concat_rows(values), parts, {});
}

Var slice_rows(Var a, std::size_t offset, std::size_t count) {
  return tape_of(a).record(Op::kSliceRows, slice_rows(a.value(), offset, count),
                           {a}, {.scalar = 0.0, .offset = offset, .shape = {}});
}

Var pad_rows(Var a, std::size_t offset, std::size_t total_rows) {
  return tape_of(a).record(Op::kPadRows,
                           pad_rows(a.value(), offset, total_rows), {a},
                           {.scalar = 0.0, .offset = offset, .shape = {}});
}

Var reshape(Var a, const Shape& shape) {
  return tape_of(a).record(Op::kReshape, reshape(a.value(), shape), {a},
                           {.scalar = 0.0, .offset = 0, .shape = shape});
}

Var dot(Var a, Var b) { return sum(mul(a, b)); }

Array grad(const std::function<Var(Var)>& f, const Array& at) {
  Tape tape;
  Var x = tape.leaf(at);
  Var y = f(x);
  const Var targets[] = {x};
  return tape.gradient_values(y, targets)[0];
}

Var grad(const std::function<Var(Var)>& f, Var at) {
  Var y = f(at);
  const Var targets[] = {at};
  return tape_of(at).gradient(y, targets)[0];
}

double evaluate(const std::function<Var(Var)>& f, const Array& at) {
  Tape tape;
  return f(tape.leaf(at)).item();
}

Array finite_diff(const std::function<double(const Array&)>& f,
                  const Array& at, double h) {
  require(h > 0.0, "finite_diff: step must be positive");
  Array out(at.shape());
  Array probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double x = at[i];
    probe[i] = x + h;
    const double up = f(probe);
    probe[i] = x - h;
    const double down = f(probe);
    probe[i] = x;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

}  // namespace igbo::ndiff
