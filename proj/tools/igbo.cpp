// Command-line driver: one subcommand per pipeline stage. Every stage reads
// its inputs from flags or a TOML config (flags win) and writes fixed file
// names under --out.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "igbo/biopt.hpp"
#include "igbo/dagbuild.hpp"
#include "igbo/datagen.hpp"
#include "igbo/errors.hpp"
#include "igbo/evaluate.hpp"
#include "igbo/format.hpp"
#include "igbo/io.hpp"
#include "igbo/pathoracle.hpp"
#include "igbo/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace igbo;

namespace {

// Bad flag combinations and values detected after parsing; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

struct Context {
  Config cfg;
  std::uint64_t seed = 0;
  fs::path out;
};

Context resolve(const Globals& g) {
  Context c;
  if (g.config) c.cfg = Config::load(*g.config);
  if (g.seed) {
    c.seed = *g.seed;
  } else if (c.cfg.has("seed")) {
    c.seed = c.cfg.count("seed", 0);
  } else {
    throw UsageError("a seed is required: pass --seed or set seed in the config");
  }
  c.out = g.out;
  fs::create_directories(c.out);
  return c;
}

template <class T>
T pick(const std::optional<T>& flag, T fallback) {
  return flag ? *flag : fallback;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError("cannot parse '" + cell + "' in list '" + text + "'");
    }
  }
  return out;
}

std::size_t as_count(double v, const std::string& what) {
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw UsageError(what + " must be a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

void write_csv(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ostringstream s;
  body(s);
  write_text_file(path, s.str());
}

// Attribution settings shared by build-dag, train-* and evaluate.
struct AttributionFlags {
  std::optional<std::size_t> M;
  std::optional<std::string> oracle;
  std::optional<std::size_t> K;
  std::optional<std::string> baseline;
};

void add_attribution_flags(CLI::App* app, AttributionFlags& f) {
  app->add_option("--M", f.M, "integration points per path");
  app->add_option("--oracle", f.oracle, "oracle checkpoint; linear paths if absent");
  app->add_option("--K", f.K, "anchors per oracle path");
  app->add_option("--baseline", f.baseline, "path start: mean or zero");
}

bool zero_baseline(const Context& c, const std::optional<std::string>& flag) {
  const std::string base = pick(flag, c.cfg.text("training.baseline", "mean"));
  if (base != "mean" && base != "zero") throw UsageError("--baseline must be mean or zero");
  return base == "zero";
}

struct Attribution {
  AttributionConfig config;
  bool zero_baseline = false;
  std::optional<OracleCheckpoint> oracle;
  std::size_t K = 3;

  PathSource source(const std::vector<Sample>& data) const {
    PathSource s;
    s.points = config.points;
    const std::size_t T = data.front().x.length();
    s.baseline = zero_baseline ? Baseline::zero(T, data.front().x.features())
                               : Baseline::feature_mean(series_of(data), T);
    s.oracle = oracle ? &oracle->oracle : nullptr;
    s.anchors = K;
    return s;
  }
};

Attribution attribution(const Context& c, const AttributionFlags& f) {
  Attribution a;
  a.config.points = pick(f.M, c.cfg.count("training.points", 32));
  const std::string rule = c.cfg.text("training.rule", "left");
  if (rule != "left" && rule != "trapezoid") throw UsageError("training.rule must be left or trapezoid");
  a.config.rule = rule == "left" ? RiemannRule::kLeft : RiemannRule::kTrapezoid;
  a.config.beta = c.cfg.number("training.beta", kDefaultBeta);
  a.zero_baseline = zero_baseline(c, f.baseline);
  if (a.config.points < 2) throw UsageError("--M must be at least 2");
  const std::string oracle = f.oracle ? *f.oracle : c.cfg.text("oracle.checkpoint", "");
  if (!oracle.empty()) {
    a.oracle = oracle_from_json(read_text_file(oracle));
    a.K = pick(f.K, c.cfg.count("oracle.K", a.oracle->K));
    if (a.config.points < a.K + 2) throw UsageError("--M must be at least K + 2");
  }
  return a;
}

SeqModelParams fresh_model(const Context& c, std::size_t d) {
  SeqModelParams p = SeqModelParams::init(c.cfg.count("model.h", 8), d, c.seed);
  const std::string act = c.cfg.text("model.activation", "tanh");
  if (act != "tanh" && act != "identity") throw UsageError("model.activation must be tanh or identity");
  p.activation = act == "tanh" ? Activation::kTanh : Activation::kIdentity;
  return p;
}

struct TrainFlags {
  std::optional<std::size_t> epochs;
  std::optional<double> eta;
  std::optional<std::size_t> batch;
  std::optional<std::string> lambda;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--epochs", f.epochs, "passes over the data");
  app->add_option("--eta", f.eta, "step size");
  app->add_option("--batch", f.batch, "batch size");
  app->add_option("--lambda", f.lambda, "lambda: F, linear:A:B:S or dynamic");
}

TrainConfig train_config(const Context& c, const TrainFlags& f, const AttributionConfig& a) {
  TrainConfig t;
  t.epochs = pick(f.epochs, c.cfg.count("training.epochs", 20));
  t.batch_size = pick(f.batch, c.cfg.count("training.batch", 16));
  t.seed = c.seed;
  t.step.eta = pick(f.eta, c.cfg.number("training.eta", 0.05));
  t.step.schedule = LambdaSchedule::parse(pick(f.lambda, c.cfg.text("training.lambda", "0.5")));
  t.step.attribution = a;
  t.checkpoint_every = c.cfg.count("training.checkpoint_every", 0);
  if (!(t.step.eta > 0.0)) throw UsageError("--eta must be positive");
  if (t.batch_size == 0) throw UsageError("--batch must be positive");
  return t;
}

TrainResult run_training(const Context& c, SeqModelParams init, const std::vector<Sample>& data,
                         const InterpretabilityDag& dag, const Attribution& attr,
                         TrainConfig cfg) {
  const std::vector<IntegrationPath> paths = make_paths(data, attr.source(data));
  if (cfg.checkpoint_every > 0) {
    cfg.on_checkpoint = [&](std::size_t step, const SeqModelParams& p) {
      write_text_file(c.out / "checkpoints" / ("step_" + std::to_string(step) + ".json"),
                      model_to_json(p));
    };
  }
  TrainResult r = train(std::move(init), data, paths, dag, cfg);
  for (const StepRecord& s : r.history) {
    if (s.lambda_clamped) {
      std::cerr << "warning: lambda clamped to " << fmt17(s.lambda) << " at step " << s.step
                << '\n';
      break;
    }
  }
  std::size_t skipped = 0;
  for (const StepRecord& s : r.history) skipped += s.skipped;
  if (skipped) std::cerr << "warning: " << skipped << " steps skipped on maximal conflict\n";
  write_text_file(c.out / "model.json", model_to_json(r.params));
  write_csv(c.out / "history.csv",
            [&](std::ostream& o) { write_history(o, r.history, r.final); });
  return r;
}

InterpretabilityDag empty_dag(std::size_t d) {
  InterpretabilityDag dag;
  dag.nodes = default_feature_names(d);
  dag.provenance = "none";
  return dag;
}

// ---------------------------------------------------------------- commands

struct GenDataFlags {
  std::optional<std::string> kind, coefficients, twin, file;
  std::optional<std::size_t> series, T, d, lag;
  std::optional<double> mu, noise, ar, twin_noise, spread;
};

int cmd_gen_data(const Context& c, const GenDataFlags& f) {
  GeneratorConfig g;
  g.kind = parse_generator(pick(f.kind, c.cfg.text("data.kind", "linear-lag")));
  g.series = pick(f.series, c.cfg.count("data.series", 200));
  g.T = pick(f.T, c.cfg.count("data.T", 8));
  g.d = pick(f.d, c.cfg.count("data.d", g.kind == GeneratorKind::kBanana ? 2 : 3));
  if (g.T < 2 || g.d < 2) throw UsageError("gen-data needs --T >= 2 and --d >= 2");
  g.coefficients = f.coefficients ? parse_list(*f.coefficients)
                                  : c.cfg.numbers("data.coefficients", {});
  if (!g.coefficients.empty() && g.coefficients.size() != g.d) {
    throw UsageError("--coefficients needs exactly d values");
  }
  g.mu = pick(f.mu, c.cfg.number("data.mu", 0.0));
  g.lag = pick(f.lag, c.cfg.count("data.lag", 1));
  g.noise = pick(f.noise, c.cfg.number("data.noise", 0.1));
  g.ar = pick(f.ar, c.cfg.number("data.ar", 0.0));
  g.spread = pick(f.spread, c.cfg.number("data.spread", 0.05));
  const std::vector<double> twin =
      f.twin ? parse_list(*f.twin) : c.cfg.numbers("data.twin", {});
  if (!twin.empty()) {
    if (twin.size() != 2) throw UsageError("--twin takes two feature indices a,b");
    g.twin = true;
    g.twin_pair = {as_count(twin[0], "--twin"), as_count(twin[1], "--twin")};
    if (g.twin_pair.first >= g.d || g.twin_pair.second >= g.d ||
        g.twin_pair.first == g.twin_pair.second) {
      throw UsageError("--twin needs two distinct features below d");
    }
  }
  g.twin_noise = pick(f.twin_noise, c.cfg.number("data.twin_noise", 0.1));
  g.seed = c.seed;
  const std::vector<Sample> data = generate(g);
  const fs::path path = c.out / pick(f.file, std::string("data.csv"));
  write_csv(path, [&](std::ostream& o) { write_dataset(o, data); });
  std::cout << "wrote " << data.size() << " series (T=" << g.T << ", d=" << g.d << ", "
            << generator_name(g.kind) << ") to " << path.string() << '\n';
  return 0;
}

int cmd_fit_assessor(const Context& c, const std::string& data_path) {
  const std::vector<Sample> data = load_dataset(data_path);
  GaussianAssessor a = GaussianAssessor::fit(series_of(data));
  write_text_file(c.out / "assessor.json", a.to_json());
  std::cout << "fitted assessor on " << data.size() << " series; wrote "
            << (c.out / "assessor.json").string() << '\n';
  return 0;
}

struct OracleFlags {
  std::string data;
  std::optional<std::string> assessor;
  std::optional<std::size_t> K, width, epochs, batch;
  std::optional<double> eta;
  std::optional<std::string> lambda, baseline;
};

int cmd_train_oracle(const Context& c, const OracleFlags& f) {
  const std::vector<Sample> data = load_dataset(f.data);
  const std::vector<TimeSeries> series = series_of(data);
  GaussianAssessor assessor = f.assessor
                                  ? GaussianAssessor::from_json(read_text_file(*f.assessor))
                                  : GaussianAssessor::fit(series);
  OracleConfig oc;
  oc.K = pick(f.K, c.cfg.count("oracle.K", 3));
  oc.epochs = pick(f.epochs, c.cfg.count("oracle.epochs", 30));
  oc.batch = pick(f.batch, c.cfg.count("oracle.batch", 16));
  oc.eta = pick(f.eta, c.cfg.number("oracle.eta", 0.05));
  oc.schedule = LambdaSchedule::parse(pick(f.lambda, c.cfg.text("oracle.lambda", "0.5")));
  oc.seed = c.seed;
  if (oc.K < 1) throw UsageError("--K must be at least 1");
  const std::size_t width = pick(f.width, c.cfg.count("oracle.width", kDefaultOracleWidth));
  const std::size_t T = series.front().length(), d = series.front().features();
  const Array base = zero_baseline(c, f.baseline) ? Baseline::zero(T, d).values
                                                  : Baseline::feature_mean(series, T).values;
  std::vector<std::pair<Array, Array>> pairs;
  for (const TimeSeries& s : series) pairs.emplace_back(base, s.values());
  OracleTraining t = train_oracle(OracleParams::init(T, d, width, c.seed), assessor, pairs, oc);
  write_text_file(c.out / "oracle.json", oracle_to_json(t.oracle, oc.K));
  write_csv(c.out / "oracle_history.csv",
            [&](std::ostream& o) { write_oracle_history(o, t.history); });

  double chord = 0.0, trained = 0.0;
  for (const auto& [b, x] : pairs) {
    for (const Array& p : chord_anchors(b, x, oc.K)) chord += assessor.score(p);
    for (const Array& p : generate_anchors(t.oracle, b, x, oc.K)) trained += assessor.score(p);
  }
  const double n = double(pairs.size() * oc.K);
  std::cout << "oracle: mean anchor validity " << fmt17(trained / n) << " vs chord "
            << fmt17(chord / n) << "; wrote " << (c.out / "oracle.json").string() << '\n';
  return 0;
}

struct DagFlags {
  std::string data;
  std::optional<std::string> model, variance;
  std::optional<double> alpha, eps_min;
  std::optional<std::size_t> batch, bootstrap;
  AttributionFlags attr;
  TrainFlags train;
};

int cmd_build_dag(const Context& c, const DagFlags& f) {
  const std::vector<Sample> data = load_dataset(f.data);
  const std::size_t d = data.front().x.features();
  Attribution attr = attribution(c, f.attr);
  SeqModelParams model;
  if (f.model) {
    model = model_from_json(read_text_file(*f.model));
  } else {
    // No model given: fit the task-only baseline first.
    TrainConfig tc = train_config(c, f.train, attr.config);
    model = run_training(c, fresh_model(c, d), data, empty_dag(d), attr, tc).params;
  }
  require(model.features() == d, "model and dataset disagree on the feature count");
  const double alpha = pick(f.alpha, c.cfg.number("dag.alpha", 0.95));
  if (!(alpha >= 0.5 && alpha < 1.0)) throw UsageError("--alpha must lie in [0.5, 1)");
  const std::size_t n = pick(f.batch, c.cfg.count("dag.batch", 16));
  if (n < 2) throw UsageError("--batch must be at least 2 for batch statistics");
  if (data.size() < 2 * n) throw UsageError("need at least two full batches of series");

  const std::vector<IntegrationPath> paths = make_paths(data, attr.source(data));
  std::vector<const IntegrationPath*> all;
  for (const IntegrationPath& p : paths) all.push_back(&p);
  const Array scores = batch_scores(model, all, attr.config);
  // Full batches only; the remainder of the shuffled order is left out.
  std::vector<Array> batches;
  for (const auto& b : partition_batches(data.size(), n, c.seed)) {
    if (b.size() < n) continue;
    Array m(Shape{n, d});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) m(i, k) = scores(b[i], k);
    }
    batches.push_back(std::move(m));
  }
  OrientOptions opts;
  opts.mode = parse_variance_mode(pick(f.variance, c.cfg.text("dag.variance", "auto")));
  opts.bootstrap_resamples = pick(f.bootstrap, c.cfg.count("dag.bootstrap", 1000));
  opts.seed = c.seed;
  IntervalRule rule;
  rule.eps_min = pick(f.eps_min, c.cfg.number("dag.eps_min", kEpsMin));
  DagBuild built = build_dag(batch_stats(batches), alpha, rule, default_feature_names(d), opts);
  write_text_file(c.out / "dag.json", built.dag.to_json());
  write_csv(c.out / "edge_stats.csv",
            [&](std::ostream& o) { write_edge_stats(o, built.orientation); });
  std::cout << "dag: " << built.dag.edges.size() << " edges";
  for (const DagEdge& e : built.dag.edges) std::cout << ' ' << e.src << "->" << e.dst;
  std::cout << '\n';
  for (const DagEdge& e : built.dropped) {
    std::cerr << "dropped edge " << e.src << "->" << e.dst << ": interval collapsed\n";
  }
  return 0;
}

struct TrainCmdFlags {
  std::string data;
  std::optional<std::string> dag, init;
  AttributionFlags attr;
  TrainFlags train;
};

int cmd_train(const Context& c, const TrainCmdFlags& f, bool igbo) {
  const std::vector<Sample> data = load_dataset(f.data);
  const std::size_t d = data.front().x.features();
  Attribution attr = attribution(c, f.attr);
  InterpretabilityDag dag = empty_dag(d);
  if (igbo) {
    if (!f.dag) throw UsageError("train-igbo needs --dag");
    dag = InterpretabilityDag::from_json(read_text_file(*f.dag));
    require(dag.nodes.size() == d, "DAG node count differs from the dataset feature count");
  }
  SeqModelParams init = f.init ? model_from_json(read_text_file(*f.init)) : fresh_model(c, d);
  require(init.features() == d, "initial model and dataset disagree on the feature count");
  TrainResult r = run_training(c, std::move(init), data, dag, attr, train_config(c, f.train, attr.config));
  std::cout << (igbo ? "train-igbo" : "train-baseline") << ": " << r.history.size()
            << " steps, final task loss " << fmt17(r.final.task_loss) << ", interp loss "
            << fmt17(r.final.interp_loss) << '\n';
  return 0;
}

struct EvalFlags {
  std::string model, data;
  std::optional<std::string> dag, baseline_model;
  std::optional<std::size_t> batch, perturbations;
  AttributionFlags attr;
};

int cmd_evaluate(const Context& c, const EvalFlags& f) {
  const SeqModelParams model = model_from_json(read_text_file(f.model));
  const std::vector<Sample> data = load_dataset(f.data);
  const std::size_t d = data.front().x.features();
  require(model.features() == d, "model expects " + std::to_string(model.features()) +
                                     " features, dataset has " + std::to_string(d));
  Attribution attr = attribution(c, f.attr);
  InterpretabilityDag dag = f.dag ? InterpretabilityDag::from_json(read_text_file(*f.dag))
                                  : empty_dag(d);
  require(dag.nodes.size() == d, "DAG has " + std::to_string(dag.nodes.size()) +
                                     " nodes, dataset has " + std::to_string(d) + " features");

  EvaluationReport report;
  report.path_kind = attr.oracle ? "oracle" : "linear";
  const PathSource source = attr.source(data);
  const std::vector<IntegrationPath> paths = make_paths(data, source);
  std::vector<const IntegrationPath*> all;
  for (const IntegrationPath& p : paths) all.push_back(&p);
  report.dag_satisfaction_rate =
      dag_satisfaction_rate(batch_scores(model, all, attr.config), dag, &report.edges);
  report.mse = mean_squared_error(model, data);
  if (f.baseline_model) {
    const SeqModelParams base = model_from_json(read_text_file(*f.baseline_model));
    require(base.features() == d, "baseline model feature count differs");
    report.baseline_mse = mean_squared_error(base, data);
    report.relative_accuracy_delta = relative_accuracy_delta(report.mse, *report.baseline_mse);
  }
  const std::size_t batch = pick(f.batch, c.cfg.count("training.batch", 16));
  if (batch == 0) throw UsageError("--batch must be positive");
  report.interp_loss = partition_interp_loss(model, paths, partition_batches(data.size(), batch, c.seed),
                                             dag, attr.config);
  ConsistencyOptions co;
  co.perturbations = pick(f.perturbations, c.cfg.count("evaluate.perturbations", 8));
  co.seed = c.seed;
  if (co.perturbations < 2) throw UsageError("--perturbations must be at least 2");
  report.attribution_consistency = attribution_consistency(model, data, source, attr.config, co);
  const std::string json = report.to_json();
  write_text_file(c.out / "report.json", json);
  std::cout << json << '\n';
  return 0;
}

struct NoiseFlags {
  std::optional<std::string> batches, lambda;
  std::optional<double> sigma2;
  std::optional<std::size_t> draws, dim;
};

int cmd_noise_probe(const Context& c, const NoiseFlags& f) {
  std::vector<double> bs = f.batches ? parse_list(*f.batches)
                                     : c.cfg.numbers("noise.batches", {64, 128});
  if (bs.size() < 2) throw UsageError("--batches needs at least two sizes");
  const double sigma2 = pick(f.sigma2, c.cfg.number("noise.sigma2", 0.04));
  const std::size_t draws = pick(f.draws, c.cfg.count("noise.draws", 10000));
  const std::size_t dim = pick(f.dim, c.cfg.count("noise.dim", 10));
  const double lambda = parse_list(pick(f.lambda, c.cfg.text("noise.lambda", "0.5"))).at(0);
  if (!(sigma2 > 0.0) || draws < 2 || dim < 1) throw UsageError("need sigma2 > 0, draws >= 2, dim >= 1");
  if (!(lambda > 0.0 && lambda < 1.0)) throw UsageError("--lambda must lie in (0, 1)");

  // A seeded Gaussian pair stands in for the clean batch gradients.
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> g1(dim), g2(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    g1[i] = g(rng);
    g2[i] = g(rng);
  }
  GradientPair pair(g1, g2);

  nlohmann::ordered_json j;
  j["case"] = case_name(classify_case(pair, default_eps_term(dim)));
  j["sigma2"] = sigma2;
  j["lambda"] = lambda;
  j["draws"] = draws;
  j["points"] = nlohmann::ordered_json::array();
  std::vector<double> variances;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const std::size_t B = as_count(bs[i], "--batches");
    if (B == 0) throw UsageError("batch sizes must be positive");
    NoiseProbe p = projection_noise(pair, lambda, sigma2, B, draws, c.seed + i + 1);
    nlohmann::ordered_json pj;
    pj["batch"] = B;
    pj["variance"] = p.variance;
    pj["case_changes"] = p.case_changes;
    pj["skipped"] = p.skipped;
    j["points"].push_back(pj);
    variances.push_back(p.variance);
  }
  j["ratios"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i + 1 < variances.size(); ++i) {
    const double ratio = variances[i] / variances[i + 1];
    j["ratios"].push_back(ratio);
    std::cout << "variance ratio B=" << bs[i] << " vs B=" << bs[i + 1] << ": " << fmt17(ratio)
              << '\n';
  }
  write_text_file(c.out / "noise.json", j.dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretability-guided bi-objective training of sequence models"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  app.add_option("--config", globals.config, "TOML experiment config");
  app.add_option("--seed", globals.seed, "random seed (required here or in the config)");
  app.add_option("--out", globals.out, "output directory")->capture_default_str();

  GenDataFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "write a synthetic dataset CSV");
  gen_cmd->add_option("--kind", gen.kind, "linear-lag or banana");
  gen_cmd->add_option("--series", gen.series, "number of series");
  gen_cmd->add_option("--T", gen.T, "series length");
  gen_cmd->add_option("--d", gen.d, "feature count");
  gen_cmd->add_option("--coefficients", gen.coefficients, "comma-separated c_k");
  gen_cmd->add_option("--mu", gen.mu, "weight of the lagged tanh term");
  gen_cmd->add_option("--lag", gen.lag, "time lag of the tanh term");
  gen_cmd->add_option("--noise", gen.noise, "target noise sd");
  gen_cmd->add_option("--ar", gen.ar, "AR(1) coefficient of the inputs");
  gen_cmd->add_option("--twin", gen.twin, "a,b: feature b copies feature a plus noise");
  gen_cmd->add_option("--twin-noise", gen.twin_noise, "noise sd of the twin copy");
  gen_cmd->add_option("--spread", gen.spread, "banana jitter");
  gen_cmd->add_option("--file", gen.file, "file name under --out (default data.csv)");

  std::string assessor_data;
  CLI::App* fit_cmd = app.add_subcommand("fit-assessor", "fit the validity assessor");
  fit_cmd->add_option("--data", assessor_data, "dataset CSV")->required();

  OracleFlags oracle;
  CLI::App* oracle_cmd = app.add_subcommand("train-oracle", "train the path oracle");
  oracle_cmd->add_option("--data", oracle.data, "dataset CSV")->required();
  oracle_cmd->add_option("--assessor", oracle.assessor, "assessor JSON; fitted on --data if absent");
  oracle_cmd->add_option("--K", oracle.K, "anchors per path");
  oracle_cmd->add_option("--width", oracle.width, "oracle hidden width");
  oracle_cmd->add_option("--epochs", oracle.epochs, "passes over the pairs");
  oracle_cmd->add_option("--batch", oracle.batch, "pairs per step");
  oracle_cmd->add_option("--eta", oracle.eta, "step size");
  oracle_cmd->add_option("--lambda", oracle.lambda, "lambda schedule");
  oracle_cmd->add_option("--baseline", oracle.baseline, "path start: mean or zero");

  DagFlags dagf;
  CLI::App* dag_cmd = app.add_subcommand("build-dag", "orient a DAG from satisfaction scores");
  dag_cmd->add_option("--data", dagf.data, "dataset CSV")->required();
  dag_cmd->add_option("--model", dagf.model, "model checkpoint; a baseline is trained if absent");
  dag_cmd->add_option("--alpha", dagf.alpha, "orientation confidence in [0.5, 1)");
  dag_cmd->add_option("--variance", dagf.variance, "auto, between or within");
  dag_cmd->add_option("--bootstrap", dagf.bootstrap, "bootstrap resamples for degenerate pairs");
  dag_cmd->add_option("--eps-min", dagf.eps_min, "floor of the lower interval bound");
  dag_cmd->add_option("--batch", dagf.batch, "series per score batch");
  add_attribution_flags(dag_cmd, dagf.attr);
  dag_cmd->add_option("--epochs", dagf.train.epochs, "baseline epochs when no --model");
  dag_cmd->add_option("--eta", dagf.train.eta, "baseline step size when no --model");

  TrainCmdFlags base;
  CLI::App* base_cmd = app.add_subcommand("train-baseline", "task-loss-only training");
  base_cmd->add_option("--data", base.data, "dataset CSV")->required();
  base_cmd->add_option("--init", base.init, "initial model checkpoint");
  add_attribution_flags(base_cmd, base.attr);
  add_train_flags(base_cmd, base.train);

  TrainCmdFlags igbo_flags;
  CLI::App* igbo_cmd = app.add_subcommand("train-igbo", "bi-objective training under a DAG");
  igbo_cmd->add_option("--data", igbo_flags.data, "dataset CSV")->required();
  igbo_cmd->add_option("--dag", igbo_flags.dag, "DAG JSON");
  igbo_cmd->add_option("--init", igbo_flags.init, "initial model checkpoint");
  add_attribution_flags(igbo_cmd, igbo_flags.attr);
  add_train_flags(igbo_cmd, igbo_flags.train);

  EvalFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "report DAG satisfaction, accuracy, consistency");
  eval_cmd->add_option("--model", eval.model, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "dataset CSV")->required();
  eval_cmd->add_option("--dag", eval.dag, "DAG JSON");
  eval_cmd->add_option("--baseline-model", eval.baseline_model, "reference model for the accuracy delta");
  eval_cmd->add_option("--batch", eval.batch, "batch size of the interp-loss partition");
  eval_cmd->add_option("--perturbations", eval.perturbations, "J for attribution consistency");
  add_attribution_flags(eval_cmd, eval.attr);

  NoiseFlags noise;
  CLI::App* noise_cmd = app.add_subcommand("noise-probe", "variance of the projection under gradient noise");
  noise_cmd->add_option("--batches", noise.batches, "comma-separated batch sizes");
  noise_cmd->add_option("--sigma2", noise.sigma2, "per-sample gradient noise variance");
  noise_cmd->add_option("--draws", noise.draws, "Monte Carlo draws");
  noise_cmd->add_option("--dim", noise.dim, "gradient dimension");
  noise_cmd->add_option("--lambda", noise.lambda, "lambda in (0, 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const Context c = resolve(globals);
    if (gen_cmd->parsed()) return cmd_gen_data(c, gen);
    if (fit_cmd->parsed()) return cmd_fit_assessor(c, assessor_data);
    if (oracle_cmd->parsed()) return cmd_train_oracle(c, oracle);
    if (dag_cmd->parsed()) return cmd_build_dag(c, dagf);
    if (base_cmd->parsed()) return cmd_train(c, base, false);
    if (igbo_cmd->parsed()) return cmd_train(c, igbo_flags, true);
    if (eval_cmd->parsed()) return cmd_evaluate(c, eval);
    if (noise_cmd->parsed()) return cmd_noise_probe(c, noise);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
