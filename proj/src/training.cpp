#include "igbo/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "igbo/errors.hpp"
#include "igbo/format.hpp"
#include "igbo/parallel.hpp"

namespace igbo {

namespace {

void check_edges(const InterpretabilityDag& dag, std::size_t d) {
  for (const DagEdge& e : dag.edges) {
    require(e.src < d && e.dst < d,
            "DAG edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                " references a feature outside 0.." + std::to_string(d - 1));
  }
}

void check_finite(double value, const char* what, std::size_t step) {
  if (!std::isfinite(value)) {
    throw NumericalError(std::string(what) + " is non-finite at step " +
                         std::to_string(step));
  }
}

}  // namespace

EdgePenaltyReport interp_loss(const Array& scores, const InterpretabilityDag& dag) {
  require(scores.shape().rank() == 2 && scores.rows() >= 1,
          "interp_loss needs a |B| x d score matrix with |B| >= 1");
  const std::size_t B = scores.rows(), d = scores.cols();
  check_edges(dag, d);
  EdgePenaltyReport r;
  r.score_gradient = Array(Shape{B, d});
  if (dag.edges.empty()) return r;
  const double inv_e = 1.0 / double(dag.edges.size());
  const double inv_b = 1.0 / double(B);
  for (const DagEdge& e : dag.edges) {
    double gap = 0.0;
    for (std::size_t b = 0; b < B; ++b) gap += scores(b, e.src) - scores(b, e.dst);
    gap *= inv_b;
    const double penalty = std::max(e.eps - gap, 0.0) + std::max(gap - e.delta, 0.0);
    const double slope = gap < e.eps ? -1.0 : (gap > e.delta ? 1.0 : 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      r.score_gradient(b, e.src) += slope * inv_e * inv_b;
      r.score_gradient(b, e.dst) -= slope * inv_e * inv_b;
    }
    r.gaps.push_back(gap);
    r.penalties.push_back(penalty);
    r.total += penalty;
  }
  r.total *= inv_e;
  return r;
}

Var interp_loss(const std::vector<Var>& scores, const InterpretabilityDag& dag) {
  require(!scores.empty(), "interp_loss needs at least one sample");
  const std::size_t d = scores.front().value().size();
  check_edges(dag, d);
  Tape& tape = *scores.front().tape();
  if (dag.edges.empty()) return tape.constant(Array::scalar(0.0));
  Var mean = scores.front();
  for (std::size_t b = 1; b < scores.size(); ++b) mean = mean + scores[b];
  mean = scale(mean, 1.0 / double(scores.size()));
  Var total = tape.constant(Array::scalar(0.0));
  for (const DagEdge& e : dag.edges) {
    Var gap = slice_rows(mean, e.src, 1) - slice_rows(mean, e.dst, 1);
    total = total + relu(e.eps + (-gap)) + relu(gap - e.delta);
  }
  return scale(total, 1.0 / double(dag.edges.size()));
}

IntegrationPath make_path(const TimeSeries& x, const PathSource& source) {
  if (source.oracle == nullptr) return linear_path(x, source.baseline, source.points);
  std::vector<Array> anchors = generate_anchors(*source.oracle, source.baseline.values,
                                                x.values(), source.anchors);
  return expand_points(anchors, source.baseline.values, x.values(), source.points);
}

std::vector<IntegrationPath> make_paths(const std::vector<Sample>& samples,
                                        const PathSource& source) {
  std::vector<IntegrationPath> paths(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    paths[i] = make_path(samples[i].x, source);
  });
  return paths;
}

Array batch_scores(const SeqModelParams& params,
                   const std::vector<const IntegrationPath*>& paths,
                   const AttributionConfig& config) {
  require(!paths.empty(), "batch_scores needs at least one path");
  const std::size_t d = params.features();
  Array scores(Shape{paths.size(), d});
  parallel_for(paths.size(), [&](std::size_t b) {
    SatisfactionReport r = satisfaction(params, *paths[b], config);
    for (std::size_t k = 0; k < d; ++k) scores(b, k) = r.scores[k];
  });
  return scores;
}

BatchObjectives batch_objectives(const SeqModelParams& params,
                                 const std::vector<const Sample*>& batch,
                                 const std::vector<const IntegrationPath*>& paths,
                                 const InterpretabilityDag& dag,
                                 const AttributionConfig& config) {
  require(batch.size() == paths.size(), "one path per batch sample is required");
  BatchObjectives out;
  TaskLoss task = task_loss(params, batch);
  out.task_loss = task.loss;
  out.task_gradient = std::move(task.gradient);
  out.interp_gradient.assign(params.parameter_count(), 0.0);
  if (dag.edges.empty()) return out;

  EdgePenaltyReport report = interp_loss(batch_scores(params, paths, config), dag);
  out.interp_loss = report.total;
  if (report.total == 0.0) return out;
  // d total / d theta = sum_b sum_k (d total / d H_{b,k}) d H_{b,k} / d theta.
  const std::size_t d = params.features();
  std::vector<std::vector<double>> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t b) {
    std::vector<double> w(d);
    for (std::size_t k = 0; k < d; ++k) w[k] = report.score_gradient(b, k);
    if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) return;
    parts[b] = satisfaction_gradient(params, *paths[b], config, w);
  });
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i) out.interp_gradient[i] += p[i];
  }
  return out;
}

StepRecord train_step(SeqModelParams& params,
                      const std::vector<const Sample*>& batch,
                      const std::vector<const IntegrationPath*>& paths,
                      const InterpretabilityDag& dag, const StepOptions& options,
                      std::size_t step) {
  require(options.eta >= 0.0 && std::isfinite(options.eta),
          "step size must be finite and nonnegative");
  BatchObjectives obj = batch_objectives(params, batch, paths, dag, options.attribution);
  check_finite(obj.task_loss, "task loss", step);
  check_finite(obj.interp_loss, "interpretability loss", step);

  StepRecord rec;
  rec.step = step;
  rec.task_loss = obj.task_loss;
  rec.interp_loss = obj.interp_loss;
  rec.eta = options.eta;

  const std::size_t n = params.parameter_count();
  const double eps = options.eps_term > 0.0 ? options.eps_term : default_eps_term(n);
  GradientPair pair(std::move(obj.task_gradient), std::move(obj.interp_gradient));
  rec.which = classify_case(pair, eps);

  std::vector<double> direction;
  switch (rec.which) {
    case ProjectionCase::kMaxConflict:
      rec.skipped = true;
      return rec;
    case ProjectionCase::kG1Negligible:
      direction = pair.g2();
      break;
    case ProjectionCase::kG2Negligible:
      direction = pair.g1();
      break;
    case ProjectionCase::kAligned:
    case ProjectionCase::kConflicting: {
      LambdaValue lv = lambda_at(options.schedule, step, pair);
      rec.lambda = lv.lambda;
      rec.lambda_clamped = lv.clamped;
      direction = project(pair, lv.lambda, eps).direction;
      break;
    }
  }
  rec.dot_g1 = dot(direction, pair.g1());
  rec.dot_g2 = dot(direction, pair.g2());
  std::vector<double> theta = params.flatten();
  for (std::size_t i = 0; i < n; ++i) theta[i] -= options.eta * direction[i];
  for (double t : theta) check_finite(t, "parameter update", step);
  params.assign(theta);
  return rec;
}

std::vector<std::vector<std::size_t>> partition_batches(std::size_t n,
                                                        std::size_t batch_size,
                                                        std::uint64_t seed) {
  require(n >= 1, "cannot partition an empty dataset");
  require(batch_size >= 1, "batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

double partition_interp_loss(const SeqModelParams& params,
                             const std::vector<IntegrationPath>& paths,
                             const std::vector<std::vector<std::size_t>>& partition,
                             const InterpretabilityDag& dag,
                             const AttributionConfig& config) {
  require(!partition.empty(), "partition has no batches");
  if (dag.edges.empty()) return 0.0;
  double total = 0.0;
  for (const auto& batch : partition) {
    std::vector<const IntegrationPath*> ps;
    for (std::size_t i : batch) ps.push_back(&paths.at(i));
    total += interp_loss(batch_scores(params, ps, config), dag).total;
  }
  return total / double(partition.size());
}

TrainResult train(SeqModelParams params, const std::vector<Sample>& samples,
                  const std::vector<IntegrationPath>& paths,
                  const InterpretabilityDag& dag, const TrainConfig& config) {
  params.validate();
  require(!samples.empty(), "training needs at least one sample");
  require(samples.size() == paths.size(), "one path per training sample is required");
  for (const Sample& s : samples) {
    require(s.x.features() == params.features(),
            "training series feature count differs from the model");
  }
  check_edges(dag, params.features());

  const auto partition = partition_batches(samples.size(), config.batch_size, config.seed);
  TrainResult out;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& batch : partition) {
      std::vector<const Sample*> xs;
      std::vector<const IntegrationPath*> ps;
      for (std::size_t i : batch) {
        xs.push_back(&samples[i]);
        ps.push_back(&paths[i]);
      }
      out.history.push_back(train_step(params, xs, ps, dag, config.step, step));
      ++step;
      if (config.checkpoint_every > 0 && config.on_checkpoint &&
          step % config.checkpoint_every == 0) {
        config.on_checkpoint(step, params);
      }
    }
  }
  out.final.task_loss = task_loss(params, samples).loss;
  out.final.interp_loss =
      partition_interp_loss(params, paths, partition, dag, config.step.attribution);
  out.params = std::move(params);
  return out;
}

void write_history(std::ostream& out, const std::vector<StepRecord>& history,
                   const std::optional<FinalSummary>& final) {
  out << "step,task_loss,interp_loss,case,lambda,dot_g1,dot_g2,eta\n";
  for (const StepRecord& r : history) {
    out << r.step << ',' << fmt17(r.task_loss) << ',' << fmt17(r.interp_loss) << ','
        << case_name(r.which) << ',' << fmt17(r.lambda) << ',' << fmt17(r.dot_g1)
        << ',' << fmt17(r.dot_g2) << ',' << fmt17(r.eta) << '\n';
  }
  if (final) {
    out << "final," << fmt17(final->task_loss) << ',' << fmt17(final->interp_loss)
        << ",none,0,0,0,0\n";
  }
}

}  // namespace igbo
