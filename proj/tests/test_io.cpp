#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "igbo/datagen.hpp"
#include "igbo/errors.hpp"
#include "igbo/evaluate.hpp"
#include "igbo/io.hpp"
#include "test_helpers.hpp"

using namespace igbo;

TEST_CASE("model checkpoints round-trip bit for bit") {
  SeqModelParams p = testing::random_elman(3, 2, 5);
  p.activation = Activation::kIdentity;
  p.w_hh[0] = 0.1;  // not exactly representable in decimal
  SeqModelParams back = model_from_json(model_to_json(p));
  CHECK(back.flatten() == p.flatten());
  CHECK(back.activation == Activation::kIdentity);

  CHECK_THROWS_AS(model_from_json("{"), ContractViolation);
  CHECK_THROWS_AS(model_from_json(oracle_to_json(OracleParams::zeros(1, 2, 2), 1)),
                  ContractViolation);
  std::string bad = model_to_json(p);
  bad.replace(bad.find("\"h\": 3"), 6, "\"h\": 4");
  CHECK_THROWS_AS(model_from_json(bad), ContractViolation);
}

TEST_CASE("oracle checkpoints round-trip") {
  OracleParams o = OracleParams::init(2, 2, 5, 3);
  OracleCheckpoint c = oracle_from_json(oracle_to_json(o, 4));
  CHECK(c.K == 4);
  CHECK(c.oracle.T == 2);
  CHECK(c.oracle.flatten() == o.flatten());
  CHECK_THROWS_AS(oracle_from_json(model_to_json(SeqModelParams::zeros(2, 2))),
                  ContractViolation);
}

TEST_CASE("missing files name the path") {
  try {
    read_text_file("/nonexistent/model.json");
    FAIL("expected a throw");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("/nonexistent/model.json") != std::string::npos);
  }
}

TEST_CASE("dataset CSV round-trip and validation") {
  GeneratorConfig g;
  g.series = 5;
  g.T = 4;
  g.d = 3;
  g.seed = 9;
  std::vector<Sample> data = generate(g);
  std::ostringstream out;
  write_dataset(out, data);
  CHECK(out.str().rfind("series_id,t,x_0,x_1,x_2,y\n", 0) == 0);
  std::istringstream in(out.str());
  std::vector<Sample> back = read_dataset(in);
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[i].x.values() == data[i].x.values());
    CHECK(back[i].target == data[i].target);
  }

  std::istringstream wrong_header("id,t,x_0,y\n");
  CHECK_THROWS_AS(read_dataset(wrong_header), ContractViolation);
  std::istringstream gap("series_id,t,x_0,x_1,y\n0,0,1,2,3\n0,2,1,2,3\n");
  CHECK_THROWS_AS(read_dataset(gap), ContractViolation);
  std::istringstream nan("series_id,t,x_0,x_1,y\n0,0,nan,2,3\n");
  CHECK_THROWS_AS(read_dataset(nan), ContractViolation);
}

TEST_CASE("generator contracts") {
  GeneratorConfig g;
  g.series = 3;
  g.T = 5;
  g.d = 2;
  g.coefficients = {1.0, 0.0};
  g.noise = 0.0;
  g.mu = 0.0;
  for (const Sample& s : generate(g)) {
    for (std::size_t t = 0; t < 5; ++t) CHECK(s.target[t] == s.x.values()(t, 0));
  }

  std::ostringstream a, b;
  g.noise = 0.3;
  g.mu = 0.5;
  write_dataset(a, generate(g));
  write_dataset(b, generate(g));
  CHECK(a.str() == b.str());

  // Lagged term by hand: mu tanh(c . x_{t-1}), zero before the first lag.
  g.noise = 0.0;
  g.lag = 2;
  for (const Sample& s : generate(g)) {
    CHECK(s.target[1] == doctest::Approx(s.x.values()(1, 0)));
    CHECK(s.target[3] == doctest::Approx(s.x.values()(3, 0) + 0.5 * std::tanh(s.x.values()(1, 0))));
  }

  g.twin = true;
  g.twin_noise = 0.0;
  for (const Sample& s : generate(g)) {
    for (std::size_t t = 0; t < 5; ++t) CHECK(s.x.values()(t, 1) == s.x.values()(t, 0));
  }

  GeneratorConfig banana;
  banana.kind = GeneratorKind::kBanana;
  banana.d = 2;
  banana.spread = 0.0;
  for (const Sample& s : generate(banana)) {
    for (std::size_t t = 0; t < s.x.length(); ++t) {
      const double x = s.x.values()(t, 0), y = s.x.values()(t, 1);
      CHECK(x * x + y * y == doctest::Approx(1.0));
      CHECK(y >= 0.0);
    }
  }

  GeneratorConfig bad;
  bad.d = 1;
  CHECK_THROWS_AS(generate(bad), ContractViolation);
  bad.d = 3;
  bad.T = 1;
  CHECK_THROWS_AS(generate(bad), ContractViolation);
  CHECK_THROWS_AS(parse_generator("spiral"), ContractViolation);
}

TEST_CASE("config parsing") {
  Config c = Config::parse(R"(
# experiment
seed = 7
[model]
h = 8          # hidden width
activation = "tanh"
[data]
coefficients = [2.0, 1, 0,]
twin = true
name = "a # not a comment"
)");
  CHECK(c.count("seed", 0) == 7);
  CHECK(c.count("model.h", 0) == 8);
  CHECK(c.text("model.activation", "") == "tanh");
  CHECK(c.numbers("data.coefficients", {}) == std::vector<double>{2.0, 1.0, 0.0});
  CHECK(c.flag("data.twin", false));
  CHECK(c.text("data.name", "") == "a # not a comment");
  CHECK(c.number("missing.key", 1.5) == 1.5);
  CHECK_THROWS_AS(c.number("model.activation", 0.0), ContractViolation);
  CHECK_THROWS_AS(Config::parse("x = [1, 2"), ContractViolation);
  CHECK_THROWS_AS(Config::parse("just words"), ContractViolation);
  CHECK_THROWS_AS(Config::parse("n = 1.5\n").count("n", 0), ContractViolation);
}

TEST_CASE("evaluation metrics") {
  InterpretabilityDag dag;
  dag.nodes = default_feature_names(3);
  dag.edges = {{0, 1, 0.1, 0.5}, {1, 2, 0.125, 0.2}};
  std::vector<EdgeCheck> table;
  // Dyadic values keep the gaps exact: 0.25 and 0.125.
  Array scores = Array::matrix(2, 3, {0.875, 0.5, 0.25, 0.625, 0.5, 0.5});
  CHECK(dag_satisfaction_rate(scores, dag, &table) == 1.0);
  CHECK(table[0].gap == 0.25);
  CHECK(table[1].gap == 0.125);
  CHECK(table[1].satisfied);  // boundary counts
  dag.edges[1].eps = 0.15;
  CHECK(dag_satisfaction_rate(scores, dag) == 0.5);
  InterpretabilityDag bad = dag;
  bad.nodes.pop_back();
  CHECK_THROWS_AS(dag_satisfaction_rate(scores, bad), ContractViolation);

  CHECK(relative_accuracy_delta(1.0, 1.0) == 0.0);
  CHECK(relative_accuracy_delta(1.05, 1.0) == doctest::Approx(0.05));

  // A memoryless linear model has attributions that do not depend on the
  // input point, so every perturbed copy agrees exactly up to the input shift.
  GeneratorConfig g;
  g.series = 4;
  g.T = 3;
  g.d = 2;
  std::vector<Sample> data = generate(g);
  SeqModelParams lin = testing::memoryless_linear({1.0, -2.0});
  PathSource src{Baseline::zero(3, 2), 8, nullptr, 0};
  const double c = attribution_consistency(lin, data, src, {8, RiemannRule::kLeft, 5.0});
  CHECK(c > 0.999);
  CHECK(c <= 1.0 + 1e-12);
  CHECK(attribution_consistency(lin, data, src, {8, RiemannRule::kLeft, 5.0}) == c);

  SeqModelParams p = testing::random_elman(3, 2, 4);
  CHECK(mean_squared_error(p, data) == doctest::Approx(task_loss(p, data).loss).epsilon(1e-12));
}
