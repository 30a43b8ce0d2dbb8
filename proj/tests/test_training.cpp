#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "igbo/errors.hpp"
#include "igbo/training.hpp"
#include "test_helpers.hpp"

using namespace igbo;

namespace {

InterpretabilityDag one_edge(std::size_t u, std::size_t v, double eps, double delta,
                             std::size_t d = 2) {
  InterpretabilityDag dag;
  dag.nodes = default_feature_names(d);
  dag.edges = {{u, v, eps, delta}};
  return dag;
}

struct Fixture {
  std::vector<Sample> samples;
  std::vector<IntegrationPath> paths;
  SeqModelParams params;

  Fixture(std::size_t n, std::size_t T, std::size_t d, std::size_t h,
          std::uint64_t seed, std::size_t M = 8) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.1);
    for (std::size_t i = 0; i < n; ++i) {
      TimeSeries x = testing::random_series(rng, T, d);
      std::vector<double> y(T);
      for (std::size_t t = 0; t < T; ++t) y[t] = x.values()(t, 0) + g(rng);
      samples.push_back({x, y});
    }
    paths = make_paths(samples, {Baseline::zero(T, d), M, nullptr, 0});
    params = SeqModelParams::init(h, d, seed + 1);
  }

  std::vector<const Sample*> batch() const {
    std::vector<const Sample*> out;
    for (const Sample& s : samples) out.push_back(&s);
    return out;
  }
  std::vector<const IntegrationPath*> batch_paths() const {
    std::vector<const IntegrationPath*> out;
    for (const IntegrationPath& p : paths) out.push_back(&p);
    return out;
  }
};

}  // namespace

TEST_CASE("interp_loss examples") {
  InterpretabilityDag dag = one_edge(0, 1, 0.05, 0.3);
  CHECK(interp_loss(Array::matrix(1, 2, {0.6, 0.5}), dag).total == doctest::Approx(0.0));
  CHECK(interp_loss(Array::matrix(1, 2, {0.52, 0.5}), dag).total == doctest::Approx(0.03));
  CHECK(interp_loss(Array::matrix(1, 2, {0.9, 0.5}), dag).total == doctest::Approx(0.1));

  // Batch mean of the differences: (0.1 + 0.3) / 2 = 0.2, inside.
  EdgePenaltyReport r = interp_loss(Array::matrix(2, 2, {0.6, 0.5, 0.8, 0.5}), dag);
  CHECK(r.gaps[0] == doctest::Approx(0.2));
  CHECK(r.total == 0.0);

  InterpretabilityDag empty;
  empty.nodes = default_feature_names(2);
  CHECK(interp_loss(Array::matrix(1, 2, {0.1, 0.9}), empty).total == 0.0);
  CHECK_THROWS_AS(interp_loss(Array::matrix(1, 2, {0.1, 0.9}), one_edge(0, 2, 0.1, 0.2)),
                  ContractViolation);
}

TEST_CASE("hinge gradient through scores matches finite differences") {
  InterpretabilityDag dag;
  dag.nodes = default_feature_names(3);
  dag.edges = {{0, 1, 0.05, 0.3}, {1, 2, 0.1, 0.2}, {0, 2, 0.2, 0.25}};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Array s(Shape{4, 3});
    for (double& x : s.values()) x = u(rng);
    EdgePenaltyReport r = interp_loss(s, dag);
    CHECK(r.total >= 0.0);
    Array fd = ndiff::finite_diff(
        [&](const Array& a) { return interp_loss(a, dag).total; }, s, 1e-7);
    bool near_kink = false;
    for (std::size_t e = 0; e < 3; ++e) {
      near_kink |= std::fabs(r.gaps[e] - dag.edges[e].eps) < 1e-5 ||
                   std::fabs(r.gaps[e] - dag.edges[e].delta) < 1e-5;
    }
    if (near_kink) continue;
    CHECK(testing::rel_inf_error(r.score_gradient.vec(), fd.vec(), 1e-3) <= 1e-5);

    // Tape form agrees on value and gradient.
    Tape tape;
    std::vector<Var> rows;
    for (std::size_t b = 0; b < 4; ++b) {
      rows.push_back(tape.leaf(Array::column({s(b, 0), s(b, 1), s(b, 2)})));
    }
    Var total = interp_loss(rows, dag);
    CHECK(total.item() == doctest::Approx(r.total).epsilon(1e-12));
    std::vector<Array> g = tape.gradient_values(total, rows);
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(g[b][k] == doctest::Approx(r.score_gradient(b, k)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("interpretability gradient matches finite differences") {
  Fixture f(3, 3, 2, 2, 7, 6);
  f.params = testing::random_elman(2, 2, 8, 2.0);
  // Require feature 1 to dominate feature 0, which the data contradicts.
  InterpretabilityDag dag = one_edge(1, 0, 0.3, 0.6);
  AttributionConfig cfg{6, RiemannRule::kLeft, 5.0};
  BatchObjectives obj = batch_objectives(f.params, f.batch(), f.batch_paths(), dag, cfg);
  REQUIRE(obj.interp_loss > 0.0);
  Array fd = ndiff::finite_diff(
      [&](const Array& theta) {
        SeqModelParams q = f.params;
        q.assign(theta.vec());
        return interp_loss(batch_scores(q, f.batch_paths(), cfg), dag).total;
      },
      Array::column(f.params.flatten()), 1e-6);
  CHECK(testing::rel_inf_error(obj.interp_gradient, fd.vec()) <= 1e-4);
  Array fd_task = ndiff::finite_diff(
      [&](const Array& theta) {
        SeqModelParams q = f.params;
        q.assign(theta.vec());
        return task_loss(q, f.samples).loss;
      },
      Array::column(f.params.flatten()), 1e-6);
  CHECK(testing::rel_inf_error(obj.task_gradient, fd_task.vec()) <= 1e-4);
}

TEST_CASE("train_step cases") {
  Fixture f(6, 4, 2, 3, 11);
  SeqModelParams before = f.params;
  StepOptions opt;
  opt.attribution.points = 8;

  SUBCASE("satisfied intervals fall back to the task gradient") {
    InterpretabilityDag loose = one_edge(0, 1, -1.0, 2.0);
    loose.edges[0].eps = 1e-9;  // any positive gap up to 2 is fine
    Array s = batch_scores(f.params, f.batch_paths(), opt.attribution);
    double gap = 0.0;
    for (std::size_t b = 0; b < s.rows(); ++b) gap += (s(b, 0) - s(b, 1)) / s.rows();
    if (gap < 0.0) std::swap(loose.edges[0].src, loose.edges[0].dst);
    StepRecord r = train_step(f.params, f.batch(), f.batch_paths(), loose, opt, 0);
    CHECK(r.interp_loss == 0.0);
    CHECK(r.which == ProjectionCase::kG2Negligible);
    CHECK(r.dot_g1 > 0.0);
  }
  SUBCASE("zero step leaves parameters alone") {
    opt.eta = 0.0;
    StepRecord r = train_step(f.params, f.batch(), f.batch_paths(),
                              one_edge(1, 0, 0.3, 0.6), opt, 0);
    CHECK(f.params.flatten() == before.flatten());
    CHECK(r.interp_loss > 0.0);
  }
  SUBCASE("negative step is rejected") {
    opt.eta = -1.0;
    CHECK_THROWS_AS(train_step(f.params, f.batch(), f.batch_paths(),
                               one_edge(1, 0, 0.3, 0.6), opt, 0),
                    ContractViolation);
  }
}

TEST_CASE("small projected steps decrease both objectives") {
  Fixture f(8, 4, 2, 4, 21);
  InterpretabilityDag dag = one_edge(1, 0, 0.3, 0.6);
  StepOptions opt;
  opt.attribution.points = 8;
  int both = 0, total = 0;
  for (double eta : {1e-2, 1e-3, 1e-4}) {
    SeqModelParams p = f.params;
    opt.eta = eta;
    StepRecord r = train_step(p, f.batch(), f.batch_paths(), dag, opt, 0);
    REQUIRE_FALSE(is_terminal(r.which));
    CHECK(r.dot_g1 > 0.0);
    CHECK(r.dot_g2 > 0.0);
    BatchObjectives after = batch_objectives(p, f.batch(), f.batch_paths(), dag, opt.attribution);
    ++total;
    if (after.task_loss < r.task_loss && after.interp_loss < r.interp_loss) ++both;
    // First-order prediction of each decrease.
    if (eta <= 1e-3) {
      CHECK(r.task_loss - after.task_loss == doctest::Approx(eta * r.dot_g1).epsilon(0.05));
      CHECK(r.interp_loss - after.interp_loss == doctest::Approx(eta * r.dot_g2).epsilon(0.05));
    }
  }
  CHECK(both == total);
}

TEST_CASE("train loop contracts") {
  Fixture f(10, 3, 2, 3, 31);
  InterpretabilityDag dag = one_edge(1, 0, 0.3, 0.6);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.step.attribution.points = 6;
  cfg.step.eta = 0.05;

  SUBCASE("zero epochs") {
    cfg.epochs = 0;
    TrainResult r = train(f.params, f.samples, f.paths, dag, cfg);
    CHECK(r.history.empty());
    CHECK(r.params.flatten() == f.params.flatten());
  }
  SUBCASE("edgeless DAG is plain gradient descent") {
    cfg.epochs = 2;
    InterpretabilityDag none;
    none.nodes = default_feature_names(2);
    TrainResult r = train(f.params, f.samples, f.paths, none, cfg);
    SeqModelParams p = f.params;
    for (std::size_t e = 0; e < 2; ++e) {
      for (const auto& batch : partition_batches(10, 4, cfg.seed)) {
        std::vector<const Sample*> xs;
        for (std::size_t i : batch) xs.push_back(&f.samples[i]);
        std::vector<double> g = task_loss(p, xs).gradient, theta = p.flatten();
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.step.eta * g[i];
        p.assign(theta);
      }
    }
    CHECK(r.params.flatten() == p.flatten());
    for (const StepRecord& s : r.history) CHECK(s.which == ProjectionCase::kG2Negligible);
  }
  SUBCASE("deterministic with a final summary and checkpoints") {
    cfg.epochs = 2;
    std::vector<std::size_t> ticks;
    cfg.checkpoint_every = 2;
    cfg.on_checkpoint = [&](std::size_t step, const SeqModelParams&) { ticks.push_back(step); };
    TrainResult a = train(f.params, f.samples, f.paths, dag, cfg);
    TrainResult b = train(f.params, f.samples, f.paths, dag, cfg);
    CHECK(a.params.flatten() == b.params.flatten());
    REQUIRE(a.history.size() == 6);  // 3 batches x 2 epochs
    CHECK(ticks == std::vector<std::size_t>{2, 4, 6, 2, 4, 6});
    const double again = partition_interp_loss(a.params, f.paths,
                                               partition_batches(10, 4, cfg.seed), dag,
                                               cfg.step.attribution);
    CHECK(a.final.interp_loss == again);
    std::ostringstream csv;
    write_history(csv, a.history, a.final);
    const std::string text = csv.str();
    CHECK(text.rfind("step,task_loss,interp_loss,case,lambda,dot_g1,dot_g2,eta\n", 0) == 0);
    CHECK(text.find("\nfinal,") != std::string::npos);
  }
}

TEST_CASE("partition_batches") {
  auto p = partition_batches(10, 4, 3);
  REQUIRE(p.size() == 3);
  CHECK(p[2].size() == 2);
  std::vector<std::size_t> all;
  for (const auto& b : p) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == i);
  CHECK(partition_batches(10, 4, 3) == p);
  CHECK_THROWS_AS(partition_batches(0, 4, 3), ContractViolation);
}
