#include "igbo/seqmodel.hpp"

#include <cmath>
#include <random>

#include "igbo/errors.hpp"
#include "igbo/parallel.hpp"

namespace igbo {

TimeSeries::TimeSeries(Array values) : values_(std::move(values)) {
  require(values_.shape().rank() == 2, "time series must be a T x d matrix");
  require(values_.rows() >= 1 && values_.cols() >= 1,
          "time series needs T >= 1 and d >= 1");
  require(values_.all_finite(), "time series contains non-finite entries");
}

Array TimeSeries::row(std::size_t t) const {
  const std::size_t d = features();
  return Array(Shape{d, 1},
               std::vector<double>(values_.vec().begin() + t * d,
                                   values_.vec().begin() + (t + 1) * d));
}

Baseline Baseline::zero(std::size_t length, std::size_t features) {
  return {Array(Shape{length, features}), BaselineKind::kZero};
}

Baseline Baseline::feature_mean(const std::vector<TimeSeries>& dataset,
                                std::size_t length) {
  require(!dataset.empty(), "feature-mean baseline needs a nonempty dataset");
  const std::size_t d = dataset.front().features();
  std::vector<double> means(d, 0.0);
  std::size_t count = 0;
  for (const TimeSeries& s : dataset) {
    require(s.features() == d, "dataset series disagree on feature count");
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t k = 0; k < d; ++k) means[k] += s.values()(t, k);
    }
    count += s.length();
  }
  for (double& m : means) m /= static_cast<double>(count);
  return feature_mean(std::move(means), length);
}

Baseline Baseline::feature_mean(std::vector<double> means, std::size_t length) {
  const std::size_t d = means.size();
  Array values(Shape{length, d});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t k = 0; k < d; ++k) values(t, k) = means[k];
  }
  return {std::move(values), BaselineKind::kFeatureMean};
}

Baseline Baseline::user(Array values) {
  require(values.shape().rank() == 2 && values.all_finite(),
          "user baseline must be a finite T x d matrix");
  return {std::move(values), BaselineKind::kUser};
}

std::size_t SeqModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Array* a : blocks()) n += a->size();
  return n;
}

SeqModelParams SeqModelParams::zeros(std::size_t hidden, std::size_t features) {
  require(hidden >= 1 && features >= 1, "model needs hidden >= 1 and d >= 1");
  SeqModelParams p;
  p.w_hh = Array(Shape{hidden, hidden});
  p.w_hx = Array(Shape{hidden, features});
  p.b = Array(Shape{hidden, 1});
  p.u = Array(Shape{1, hidden});
  p.w = Array(Shape{1, features});
  p.c = Array(Shape{1, 1});
  return p;
}

SeqModelParams SeqModelParams::init(std::size_t hidden, std::size_t features,
                                    std::uint64_t seed) {
  SeqModelParams p = zeros(hidden, features);
  std::mt19937_64 rng(seed);
  const double bound = 0.5 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Array* a : p.blocks()) {
    for (double& v : a->values()) v = dist(rng);
  }
  return p;
}

const std::vector<std::string>& SeqModelParams::names() {
  static const std::vector<std::string> kNames = {"w_hh", "w_hx", "b",
                                                  "u",    "w",    "c"};
  return kNames;
}

std::vector<const Array*> SeqModelParams::blocks() const {
  return {&w_hh, &w_hx, &b, &u, &w, &c};
}

std::vector<Array*> SeqModelParams::blocks() {
  return {&w_hh, &w_hx, &b, &u, &w, &c};
}

std::vector<double> SeqModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Array* a : blocks()) {
    flat.insert(flat.end(), a->vec().begin(), a->vec().end());
  }
  return flat;
}

void SeqModelParams::assign(const std::vector<double>& flat) {
  require(flat.size() == parameter_count(),
          "flat parameter vector has the wrong length");
  std::size_t offset = 0;
  for (Array* a : blocks()) {
    for (double& v : a->values()) v = flat[offset++];
  }
}

void SeqModelParams::validate() const {
  const std::size_t h = hidden(), d = features();
  require(w_hh.shape() == Shape({h, h}), "w_hh must be hidden x hidden");
  require(w_hx.shape() == Shape({h, d}), "w_hx must be hidden x d");
  require(b.shape() == Shape({h, 1}), "b must be hidden x 1");
  require(u.shape() == Shape({1, h}), "u must be 1 x hidden");
  require(w.shape() == Shape({1, d}), "w must be 1 x d");
  require(c.shape() == Shape({1, 1}), "c must be 1 x 1");
  for (const Array* a : blocks()) {
    require(a->all_finite(), "model parameters must be finite");
  }
}

ForwardResult forward(const SeqModelParams& params, const TimeSeries& x) {
  const std::size_t h = params.hidden(), d = params.features();
  require(x.features() == d, "series has " + std::to_string(x.features()) +
                                 " features, model expects " +
                                 std::to_string(d));
  const std::size_t T = x.length();
  ForwardResult out;
  out.outputs.resize(T);
  out.trajectory.states = Array(Shape{T + 1, h});
  Array& states = out.trajectory.states;
  const Array& xv = x.values();
  for (std::size_t t = 0; t < T; ++t) {
    double y = params.c[0];
    for (std::size_t j = 0; j < h; ++j) y += params.u[j] * states(t, j);
    for (std::size_t k = 0; k < d; ++k) y += params.w[k] * xv(t, k);
    out.outputs[t] = y;
    for (std::size_t i = 0; i < h; ++i) {
      double a = params.b[i];
      for (std::size_t j = 0; j < h; ++j) a += params.w_hh(i, j) * states(t, j);
      for (std::size_t k = 0; k < d; ++k) a += params.w_hx(i, k) * xv(t, k);
      states(t + 1, i) =
          params.activation == Activation::kTanh ? std::tanh(a) : a;
    }
  }
  return out;
}

ModelVars ModelVars::bind(Tape& tape, const SeqModelParams& params) {
  return {tape.leaf(params.w_hh), tape.leaf(params.w_hx), tape.leaf(params.b),
          tape.leaf(params.u),    tape.leaf(params.w),    tape.leaf(params.c),
          params.activation};
}

std::vector<Var> forward(const ModelVars& model, std::span<const Var> rows) {
  require(!rows.empty(), "forward needs at least one time step");
  Tape& tape = *model.w_hh.tape();
  Var state = tape.constant(Array(Shape{model.w_hh.value().rows(), 1}));
  std::vector<Var> outputs;
  outputs.reserve(rows.size());
  for (Var x : rows) {
    outputs.push_back(matmul(model.u, state) + matmul(model.w, x) + model.c);
    Var pre = matmul(model.w_hh, state) + matmul(model.w_hx, x) + model.b;
    state = model.activation == Activation::kTanh ? tanh(pre) : pre;
  }
  return outputs;
}

std::vector<Var> bind_rows(Tape& tape, const Array& values) {
  const std::size_t T = values.rows(), d = values.cols();
  std::vector<Var> rows;
  rows.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    rows.push_back(tape.constant(Array(
        Shape{d, 1}, std::vector<double>(values.vec().begin() + t * d,
                                         values.vec().begin() + (t + 1) * d))));
  }
  return rows;
}

Array input_jacobian(const SeqModelParams& params, const TimeSeries& x) {
  require(x.features() == params.features(), "series/model feature mismatch");
  const std::size_t T = x.length(), d = x.features();
  Tape tape;
  ModelVars model = ModelVars::bind(tape, params);
  std::vector<Var> rows = bind_rows(tape, x.values());
  std::vector<Var> outputs = forward(model, rows);
  Array jac(Shape{T, T, d});
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Array> g = tape.gradient_values(outputs[t], rows);
    for (std::size_t s = 0; s < T; ++s) {
      for (std::size_t k = 0; k < d; ++k) jac[(t * T + s) * d + k] = g[s][k];
    }
  }
  return jac;
}

std::vector<double> flatten_blocks(const std::vector<Array>& blocks) {
  std::vector<double> flat;
  for (const Array& a : blocks) flat.insert(flat.end(), a.vec().begin(), a.vec().end());
  return flat;
}

TaskLoss task_loss(const SeqModelParams& params,
                   const std::vector<const Sample*>& batch) {
  require(!batch.empty(), "task loss needs a nonempty batch");
  struct Part {
    double sse = 0.0;
    std::size_t count = 0;
    std::vector<double> grad;
  };
  std::vector<Part> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t n) {
    const Sample& s = *batch[n];
    require(s.target.size() == s.x.length(),
            "target length must equal series length");
    Tape tape;
    ModelVars model = ModelVars::bind(tape, params);
    std::vector<Var> rows = bind_rows(tape, s.x.values());
    std::vector<Var> outputs = forward(model, rows);
    Var sse = tape.constant(Array::scalar(0.0));
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      sse = sse + square(outputs[t] - s.target[t]);
    }
    parts[n].sse = sse.item();
    parts[n].count = outputs.size();
    parts[n].grad = flatten_blocks(tape.gradient_values(sse, model.all()));
  });
  TaskLoss out;
  out.gradient.assign(params.parameter_count(), 0.0);
  std::size_t count = 0;
  for (const Part& p : parts) {
    out.loss += p.sse;
    count += p.count;
    for (std::size_t i = 0; i < p.grad.size(); ++i) out.gradient[i] += p.grad[i];
  }
  const double inv = 1.0 / static_cast<double>(count);
  out.loss *= inv;
  for (double& g : out.gradient) g *= inv;
  return out;
}

TaskLoss task_loss(const SeqModelParams& params,
                   const std::vector<Sample>& batch) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(batch.size());
  for (const Sample& s : batch) ptrs.push_back(&s);
  return task_loss(params, ptrs);
}

}  // namespace igbo
