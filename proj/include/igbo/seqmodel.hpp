#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "igbo/ndiff/array.hpp"
#include "igbo/ndiff/tape.hpp"

namespace igbo {

using ndiff::Array;
using ndiff::Shape;
using ndiff::Tape;
using ndiff::Var;

// A T x d multivariate series X. Rows are time steps.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(Array values);

  const Array& values() const { return values_; }
  std::size_t length() const { return values_.rows(); }
  std::size_t features() const { return values_.cols(); }
  // Row t as a d x 1 column.
  Array row(std::size_t t) const;

 private:
  Array values_;
};

enum class BaselineKind { kZero, kFeatureMean, kUser };

// Reference input X' paired with a series of the same shape.
struct Baseline {
  Array values;
  BaselineKind kind = BaselineKind::kZero;

  static Baseline zero(std::size_t length, std::size_t features);
  // Every row equals the per-feature mean over all series and time steps.
  static Baseline feature_mean(const std::vector<TimeSeries>& dataset,
                               std::size_t length);
  static Baseline feature_mean(std::vector<double> means, std::size_t length);
  static Baseline user(Array values);
};

enum class Activation { kTanh, kIdentity };

// Parameters of the Elman cell
//   h_t = act(W_hh h_{t-1} + W_hx x_t + b),  y_t = u . h_{t-1} + w . x_t + c
// with act = tanh by default. The identity activation gives a linear
// recurrence, used for hand-checkable models.
struct SeqModelParams {
  Array w_hh;  // hidden x hidden
  Array w_hx;  // hidden x d
  Array b;     // hidden x 1
  Array u;     // 1 x hidden
  Array w;     // 1 x d
  Array c;     // 1 x 1
  Activation activation = Activation::kTanh;

  std::size_t hidden() const { return w_hh.rows(); }
  std::size_t features() const { return w_hx.cols(); }
  std::size_t parameter_count() const;

  static SeqModelParams zeros(std::size_t hidden, std::size_t features);
  // Uniform in [-0.5, 0.5] / sqrt(hidden).
  static SeqModelParams init(std::size_t hidden, std::size_t features,
                             std::uint64_t seed);

  // Order: w_hh, w_hx, b, u, w, c, each row-major.
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
  void validate() const;

  static const std::vector<std::string>& names();
  std::vector<const Array*> blocks() const;
  std::vector<Array*> blocks();
};

// (T + 1) x hidden states; row 0 is h_0 = 0.
struct HiddenTrajectory {
  Array states;
};

struct ForwardResult {
  std::vector<double> outputs;
  HiddenTrajectory trajectory;
};

ForwardResult forward(const SeqModelParams& params, const TimeSeries& x);

// Tape-side parameters. Every block is a leaf so gradients can target it.
struct ModelVars {
  Var w_hh, w_hx, b, u, w, c;
  Activation activation = Activation::kTanh;

  static ModelVars bind(Tape& tape, const SeqModelParams& params);
  std::vector<Var> all() const { return {w_hh, w_hx, b, u, w, c}; }
};

// Outputs as 1 x 1 variables; `rows` are d x 1 inputs, one per time step.
std::vector<Var> forward(const ModelVars& model, std::span<const Var> rows);

// Binds the rows of a numeric series as tape constants.
std::vector<Var> bind_rows(Tape& tape, const Array& values);

// J with shape T x T x d: J[t][s, k] = d outputs[t] / d X[s, k].
Array input_jacobian(const SeqModelParams& params, const TimeSeries& x);

struct Sample {
  TimeSeries x;
  std::vector<double> target;
};

struct TaskLoss {
  double loss = 0.0;
  std::vector<double> gradient;  // flattened like SeqModelParams::flatten
};

// Mean squared error over every (sample, t) pair and its parameter gradient.
TaskLoss task_loss(const SeqModelParams& params,
                   const std::vector<const Sample*>& batch);
TaskLoss task_loss(const SeqModelParams& params,
                   const std::vector<Sample>& batch);

// Flattens per-block gradient arrays in parameter order.
std::vector<double> flatten_blocks(const std::vector<Array>& blocks);

}  // namespace igbo
