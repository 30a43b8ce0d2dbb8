#include <cmath>
#include <random>

#include "doctest.h"
#include "igbo/errors.hpp"
#include "igbo/seqmodel.hpp"

using namespace igbo;

namespace {

// h_t = 0.5 h_{t-1} + x_t, y_t = h_{t-1}.
SeqModelParams scalar_linear_cell() {
  SeqModelParams p = SeqModelParams::zeros(1, 1);
  p.activation = Activation::kIdentity;
  p.w_hh[0] = 0.5;
  p.w_hx[0] = 1.0;
  p.u[0] = 1.0;
  return p;
}

// y_t = sum_k w_k x_{t,k}; no memory.
SeqModelParams memoryless_linear(std::vector<double> w) {
  SeqModelParams p = SeqModelParams::zeros(2, w.size());
  for (std::size_t k = 0; k < w.size(); ++k) p.w[k] = w[k];
  return p;
}

TimeSeries random_series(std::mt19937_64& rng, std::size_t T, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Array v(Shape{T, d});
  for (double& x : v.values()) x = n(rng);
  return TimeSeries(v);
}

double rel_inf_error(const std::vector<double>& a, const std::vector<double>& b) {
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    err = std::max(err, std::fabs(a[i] - b[i]));
    scale = std::max(scale, std::fabs(b[i]));
  }
  return err / std::max(scale, 1e-12);
}

}  // namespace

TEST_CASE("forward examples") {
  SeqModelParams zero = SeqModelParams::zeros(3, 2);
  auto out = forward(zero, TimeSeries(Array(Shape{4, 2}, 1.7)));
  for (double y : out.outputs) CHECK(y == 0.0);

  auto lin = forward(scalar_linear_cell(), TimeSeries(Array::column({1.0, 1.0})));
  CHECK(lin.outputs[0] == 0.0);
  CHECK(lin.outputs[1] == 1.0);
  CHECK(lin.trajectory.states(1, 0) == 1.0);
  CHECK(lin.trajectory.states(2, 0) == 1.5);

  SeqModelParams pass = SeqModelParams::zeros(2, 1);
  pass.w[0] = 1.0;
  auto p = forward(pass, TimeSeries(Array::column({3.0, 7.0})));
  CHECK(p.outputs == std::vector<double>{3.0, 7.0});
}

TEST_CASE("trajectory row 0 is zero and shapes are checked") {
  std::mt19937_64 rng(3);
  SeqModelParams p = SeqModelParams::init(4, 3, 11);
  auto out = forward(p, random_series(rng, 5, 3));
  CHECK(out.trajectory.states.rows() == 6);
  for (std::size_t j = 0; j < 4; ++j) CHECK(out.trajectory.states(0, j) == 0.0);
  CHECK_THROWS_AS(forward(p, random_series(rng, 5, 2)), ContractViolation);
}

TEST_CASE("tape forward matches numeric forward bit for bit") {
  std::mt19937_64 rng(5);
  SeqModelParams p = SeqModelParams::init(5, 3, 17);
  TimeSeries x = random_series(rng, 6, 3);
  auto numeric = forward(p, x);
  Tape tape;
  auto outs = forward(ModelVars::bind(tape, p), bind_rows(tape, x.values()));
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(outs[t].item() == doctest::Approx(numeric.outputs[t]).epsilon(1e-14));
  }
  CHECK(forward(p, x).outputs == numeric.outputs);
}

TEST_CASE("input_jacobian examples") {
  std::mt19937_64 rng(7);
  SeqModelParams p = SeqModelParams::init(3, 2, 1);
  Array J = input_jacobian(p, random_series(rng, 3, 2));
  const std::size_t T = 3, d = 2;
  // Output index 0 precedes input index 1.
  for (std::size_t k = 0; k < d; ++k) CHECK(J[(0 * T + 1) * d + k] == 0.0);

  SeqModelParams lin = memoryless_linear({1.5, -0.25, 2.0});
  Array JL = input_jacobian(lin, random_series(rng, 4, 3));
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double expected = (s == t) ? lin.w[k] : 0.0;
        CHECK(JL[(t * 4 + s) * 3 + k] == expected);
      }
    }
  }

  Array JS = input_jacobian(scalar_linear_cell(), TimeSeries(Array::column({1.0, 1.0})));
  CHECK(JS[(1 * 2 + 0) * 1 + 0] == doctest::Approx(1.0));
}

TEST_CASE("causality and Jacobian agree with finite differences on random models") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = dim(rng), d = dim(rng), T = dim(rng) + 1;
    SeqModelParams p = SeqModelParams::init(h, d, rng());
    TimeSeries x = random_series(rng, T, d);
    Array J = input_jacobian(p, x);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = t + 1; s < T; ++s) {
        for (std::size_t k = 0; k < d; ++k) REQUIRE(J[(t * T + s) * d + k] == 0.0);
      }
      auto f = [&](const Array& a) { return forward(p, TimeSeries(a)).outputs[t]; };
      Array fd = ndiff::finite_diff(f, x.values(), 1e-5);
      std::vector<double> jt(J.vec().begin() + t * T * d,
                             J.vec().begin() + (t + 1) * T * d);
      double err = 0.0;
      for (std::size_t i = 0; i < jt.size(); ++i) err = std::max(err, std::fabs(jt[i] - fd[i]));
      worst = std::max(worst, err / (1.0 + fd.max_abs()));
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("task_loss examples") {
  SeqModelParams pass = SeqModelParams::zeros(2, 1);
  pass.w[0] = 1.0;
  std::vector<Sample> fit = {{TimeSeries(Array::column({3.0, 7.0})), {3.0, 7.0}}};
  TaskLoss perfect = task_loss(pass, fit);
  CHECK(perfect.loss == 0.0);
  for (double g : perfect.gradient) CHECK(g == 0.0);

  std::vector<Sample> one = {{TimeSeries(Array::column({1.0})), {0.0}}};
  CHECK(task_loss(pass, one).loss == 1.0);

  std::vector<Sample> empty;
  CHECK_THROWS_AS(task_loss(pass, empty), ContractViolation);
}

TEST_CASE("task_loss gradient matches finite differences") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 5; ++trial) {
    SeqModelParams p = SeqModelParams::init(3, 2, rng());
    std::vector<Sample> batch;
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 3; ++i) {
      TimeSeries x = random_series(rng, 4, 2);
      batch.push_back({x, {n(rng), n(rng), n(rng), n(rng)}});
    }
    TaskLoss tl = task_loss(p, batch);
    Array theta = Array::column(p.flatten());
    auto f = [&](const Array& a) {
      SeqModelParams q = p;
      q.assign(a.vec());
      return task_loss(q, batch).loss;
    };
    Array fd = ndiff::finite_diff(f, theta, 1e-5);
    CHECK(rel_inf_error(tl.gradient, fd.vec()) <= 1e-5);
  }
}

TEST_CASE("flatten and assign round trip") {
  SeqModelParams p = SeqModelParams::init(3, 2, 5);
  SeqModelParams q = SeqModelParams::zeros(3, 2);
  q.assign(p.flatten());
  CHECK(q.flatten() == p.flatten());
  CHECK(p.parameter_count() == 9 + 6 + 3 + 3 + 2 + 1);
}
