#include <sstream>

#include "doctest.h"
#include "igbo/attribution.hpp"
#include "igbo/errors.hpp"
#include "test_helpers.hpp"

using namespace igbo;
using testing::memoryless_linear;
using testing::random_elman;
using testing::random_series;
using testing::rel_inf_error;

namespace {

double completeness_error(const SeqModelParams& p, const TimeSeries& x,
                          const Baseline& b, std::size_t M,
                          RiemannRule rule = RiemannRule::kLeft) {
  const AttributionTensor a = tig(p, linear_path(x, b, M), rule);
  const auto fx = forward(p, x).outputs;
  const auto fb = forward(p, TimeSeries(b.values)).outputs;
  double worst = 0.0;
  for (std::size_t t = 0; t < x.length(); ++t) {
    double total = 0.0;
    for (std::size_t i = 0; i <= t; ++i) {
      for (std::size_t k = 0; k < x.features(); ++k) total += a.at(t, i, k);
    }
    worst = std::max(worst, std::fabs(total - (fx[t] - fb[t])));
  }
  return worst;
}

}  // namespace

TEST_CASE("linear_path examples") {
  std::mt19937_64 rng(1);
  TimeSeries x = random_series(rng, 3, 2);
  Baseline b = Baseline::user(random_series(rng, 3, 2).values());

  IntegrationPath two = linear_path(x, b, 2);
  REQUIRE(two.size() == 2);
  CHECK(two.points[0] == b.values);
  CHECK(two.points[1] == x.values());

  IntegrationPath mid = linear_path(TimeSeries(Array::scalar(2.0)),
                                    Baseline::zero(1, 1), 3);
  CHECK(mid.points[0].item() == 0.0);
  CHECK(mid.points[1].item() == 1.0);
  CHECK(mid.points[2].item() == 2.0);

  for (std::size_t M : {2u, 5u, 17u, 100u}) {
    IntegrationPath p = linear_path(x, b, M);
    CHECK(p.size() == M);
    CHECK(p.baseline() == b.values);
    CHECK(p.input() == x.values());
  }
  CHECK_THROWS_AS(linear_path(x, b, 1), ContractViolation);
  CHECK_THROWS_AS(linear_path(x, Baseline::zero(2, 2), 4), ContractViolation);
}

TEST_CASE("tig on a memoryless linear model is exact for any path") {
  std::mt19937_64 rng(2);
  const std::vector<double> w = {1.5, -0.5, 2.0};
  SeqModelParams p = memoryless_linear(w);
  TimeSeries x = random_series(rng, 4, 3);
  Baseline b = Baseline::user(random_series(rng, 4, 3).values());

  // A crooked path through a random detour shares the same endpoints.
  IntegrationPath crooked = linear_path(x, b, 2);
  crooked.points.insert(crooked.points.begin() + 1, random_series(rng, 4, 3).values());
  crooked.provenance = PathProvenance::kOracle;

  for (const IntegrationPath& path : {linear_path(x, b, 2), crooked}) {
    AttributionTensor a = tig(p, path);
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
          const double expected =
              i == t ? w[k] * (x.values()(t, k) - b.values(t, k)) : 0.0;
          CHECK(std::fabs(a.at(t, i, k) - expected) <= 1e-12);
        }
      }
    }
  }
  CHECK(completeness_error(p, x, b, 2) <= 1e-10);
}

TEST_CASE("tig examples: zero-length path and the single Riemann term") {
  std::mt19937_64 rng(3);
  SeqModelParams p = random_elman(4, 2, 9);
  TimeSeries x = random_series(rng, 3, 2);
  AttributionTensor zero = tig(p, linear_path(x, Baseline::user(x.values()), 6));
  CHECK(zero.values.max_abs() == 0.0);

  Baseline b = Baseline::user(random_series(rng, 3, 2).values());
  AttributionTensor one = tig(p, linear_path(x, b, 2));
  Array J = input_jacobian(p, TimeSeries(b.values));
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 2; ++k) {
        const double expected =
            J[(t * 3 + i) * 2 + k] * (x.values()(i, k) - b.values(i, k));
        CHECK(one.at(t, i, k) == doctest::Approx(expected).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("tig respects causality") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    SeqModelParams p = random_elman(3, 2, rng());
    TimeSeries x = random_series(rng, 5, 2);
    AttributionTensor a = tig(p, linear_path(x, Baseline::zero(5, 2), 8));
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t i = t + 1; i < 5; ++i) {
        for (std::size_t k = 0; k < 2; ++k) CHECK(std::fabs(a.at(t, i, k)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("completeness converges at first order on the linear path") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    SeqModelParams p = random_elman(8, 3, rng(), 2.0);
    TimeSeries x = random_series(rng, 4, 3);
    Baseline b = Baseline::zero(4, 3);
    const double e512 = completeness_error(p, x, b, 512);
    CHECK(e512 <= 1e-3);
    const double coarse = completeness_error(p, x, b, 33);
    const double fine = completeness_error(p, x, b, 65);
    CHECK(coarse / fine >= 1.8);
    // The trapezoid rule is second order.
    CHECK(completeness_error(p, x, b, 33, RiemannRule::kTrapezoid) < coarse);
  }
}

TEST_CASE("satisfaction examples") {
  SeqModelParams twice = memoryless_linear({2.0});
  TimeSeries one(Array::scalar(1.0));
  Baseline zero = Baseline::zero(1, 1);
  AttributionTensor a = tig(twice, linear_path(one, zero, 2));
  CHECK(a.at(0, 0, 0) == 2.0);
  SatisfactionReport r = satisfaction(twice, one, zero, a, kDefaultBeta);
  CHECK(r.scores[0] == 1.0);
  CHECK(r.residuals(0, 0) == 0.0);

  SeqModelParams two = memoryless_linear({1.5, 0.5});
  TimeSeries x(Array(Shape{1, 2}, {1.0, 1.0}));
  Baseline b = Baseline::zero(1, 2);
  SatisfactionReport s = satisfaction(two, x, b, tig(two, linear_path(x, b, 2)), 2.0);
  CHECK(s.residuals(0, 0) == doctest::Approx(0.5));
  CHECK(s.residuals(0, 1) == doctest::Approx(1.5));
  CHECK(s.scores[0] == doctest::Approx(0.5));
  CHECK(s.scores[1] == doctest::Approx(0.25));

  SatisfactionReport sharp =
      satisfaction(two, x, b, tig(two, linear_path(x, b, 2)), 1e12);
  CHECK(sharp.scores[0] < 1e-11);
  CHECK(sharp.scores[1] < 1e-11);

  CHECK_THROWS_AS(satisfaction(two, x, b, tig(two, linear_path(x, b, 2)), 0.0),
                  ContractViolation);
}

TEST_CASE("satisfaction scores stay in (0, 1]") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  std::uniform_real_distribution<double> beta(0.01, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t T = dim(rng), d = dim(rng);
    SeqModelParams p = random_elman(dim(rng), d, rng(), 2.0);
    TimeSeries x = random_series(rng, T, d, 2.0);
    Baseline b = Baseline::user(random_series(rng, T, d).values());
    AttributionConfig cfg{2 + dim(rng), RiemannRule::kLeft, beta(rng)};
    SatisfactionReport r = satisfaction(p, linear_path(x, b, cfg.points), cfg);
    for (double h : r.scores) {
      REQUIRE(h > 0.0);
      REQUIRE(h <= 1.0);
    }
    for (double h : r.residuals.values()) REQUIRE(h >= 0.0);
  }
}

TEST_CASE("graph satisfaction matches the numeric path") {
  std::mt19937_64 rng(7);
  for (RiemannRule rule : {RiemannRule::kLeft, RiemannRule::kTrapezoid}) {
    SeqModelParams p = random_elman(4, 3, rng());
    TimeSeries x = random_series(rng, 4, 3);
    IntegrationPath path = linear_path(x, Baseline::zero(4, 3), 7);
    SatisfactionReport r = satisfaction(p, path, {7, rule, 3.0});
    Tape tape;
    Var h = satisfaction_scores(ModelVars::bind(tape, p), path, 3.0, rule);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(h.value()[k] == doctest::Approx(r.scores[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("parameter gradient of H through TIG matches finite differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 6; ++trial) {
    // h=6, d=3: 36 + 18 + 6 + 6 + 3 + 1 = 70 parameters.
    SeqModelParams p = random_elman(6, 3, rng(), 2.0);
    REQUIRE(p.parameter_count() <= 200);
    TimeSeries x = random_series(rng, 4, 3);
    IntegrationPath path = linear_path(x, Baseline::zero(4, 3), 6);
    AttributionConfig cfg{6, RiemannRule::kLeft, 2.0};
    const std::vector<double> weights = {1.0, -0.5, 0.25};
    auto g = satisfaction_gradient(p, path, cfg, weights);
    auto fd = satisfaction_gradient_fd(p, path, cfg, weights, 1e-6);
    CHECK(rel_inf_error(g, fd) <= 1e-4);
  }
}

TEST_CASE("non-finite gradients name the path point") {
  SeqModelParams p = memoryless_linear({1.0, 1.0, 1.0});
  p.w_hx = Array(Shape{2, 3}, 1.0);
  TimeSeries x(Array(Shape{1, 3}, 1.0));
  IntegrationPath path = linear_path(x, Baseline::zero(1, 3), 3);
  path.points[1] = Array(Shape{1, 3}, 1.5e308);
  try {
    (void)tig(p, path);
    FAIL("expected an OOD diagnostic");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("OOD gradient at path point 2") !=
          std::string::npos);
  }
  Tape tape;
  CHECK_THROWS_AS(satisfaction_scores(ModelVars::bind(tape, p), path, 1.0),
                  NumericalError);
}

TEST_CASE("attribution CSV rows") {
  SeqModelParams p = memoryless_linear({2.0});
  TimeSeries x(Array::column({1.0, 3.0}));
  AttributionTensor a = tig(p, linear_path(x, Baseline::zero(2, 1), 2));
  std::ostringstream out;
  write_attribution_header(out);
  write_attribution_rows(out, 7, a);
  CHECK(out.str() ==
        "sample_id,t,i,k,tig\n"
        "7,0,0,0,2\n"
        "7,1,0,0,0\n"
        "7,1,1,0,6\n");
}
