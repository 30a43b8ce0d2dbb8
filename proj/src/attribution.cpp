#include "igbo/attribution.hpp"

#include <cmath>
#include <string>

#include "igbo/errors.hpp"
#include "igbo/format.hpp"
#include "igbo/parallel.hpp"

namespace igbo {

void IntegrationPath::validate() const {
  require(points.size() >= 2, "integration path needs at least 2 points");
  const Shape& shape = points.front().shape();
  require(shape.rank() == 2, "path points must be T x d matrices");
  for (const Array& q : points) {
    require(q.shape() == shape, "path points disagree in shape");
    require(q.all_finite(), "path points must be finite");
  }
}

IntegrationPath linear_path(const TimeSeries& x, const Baseline& baseline,
                            std::size_t points) {
  require(points >= 2, "linear path needs M >= 2");
  const Array& a = baseline.values;
  const Array& b = x.values();
  require(a.shape() == b.shape(), "baseline shape " + a.shape().str() +
                                      " does not match series " +
                                      b.shape().str());
  IntegrationPath path;
  path.provenance = PathProvenance::kLinear;
  path.points.reserve(points);
  path.points.push_back(a);
  const double denom = static_cast<double>(points - 1);
  for (std::size_t j = 1; j + 1 < points; ++j) {
    const double s = static_cast<double>(j) / denom;
    Array q(a.shape());
    for (std::size_t n = 0; n < q.size(); ++n) q[n] = a[n] + s * (b[n] - a[n]);
    path.points.push_back(std::move(q));
  }
  path.points.push_back(b);
  return path;
}

namespace {

std::string ood_message(std::size_t j, const std::exception& e) {
  return "OOD gradient at path point " + std::to_string(j + 1) + ": " +
         e.what();
}

// Input Jacobian at path point j; numerical failures name the point.
Array jacobian_at(const SeqModelParams& params, const IntegrationPath& path,
                  std::size_t j) {
  try {
    Array jac = input_jacobian(params, TimeSeries(path.points[j]));
    if (!jac.all_finite()) {
      throw NumericalError("non-finite input gradient");
    }
    return jac;
  } catch (const NumericalError& e) {
    throw NumericalError(ood_message(j, e));
  }
}

// The trapezoid rule averages the gradients at both ends of a segment.
bool uses_right_end(RiemannRule rule) { return rule == RiemannRule::kTrapezoid; }

}  // namespace

AttributionTensor tig(const SeqModelParams& params, const IntegrationPath& path,
                      RiemannRule rule) {
  path.validate();
  const std::size_t T = path.baseline().rows(), d = path.baseline().cols();
  require(d == params.features(), "path feature count does not match model");
  const std::size_t M = path.size();
  const std::size_t evaluated = uses_right_end(rule) ? M : M - 1;
  std::vector<Array> jacobians(evaluated);
  parallel_for(evaluated,
               [&](std::size_t j) { jacobians[j] = jacobian_at(params, path, j); });

  AttributionTensor out{T, d, Array(Shape{T, T, d})};
  for (std::size_t j = 0; j + 1 < M; ++j) {
    const Array& q0 = path.points[j];
    const Array& q1 = path.points[j + 1];
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i <= t; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
          const std::size_t cell = (t * T + i) * d + k;
          double g = jacobians[j][cell];
          if (uses_right_end(rule)) g = 0.5 * (g + jacobians[j + 1][cell]);
          out.values[cell] += g * (q1(i, k) - q0(i, k));
        }
      }
    }
  }
  return out;
}

SatisfactionReport satisfaction(const SeqModelParams& params,
                                const TimeSeries& x, const Baseline& baseline,
                                const AttributionTensor& attributions,
                                double beta) {
  require(beta > 0.0, "satisfaction sharpness beta must be positive");
  const std::size_t T = x.length(), d = x.features();
  require(attributions.T == T && attributions.d == d,
          "attribution tensor shape does not match the series");
  require(baseline.values.shape() == x.values().shape(),
          "baseline shape does not match the series");
  const std::vector<double> fx = forward(params, x).outputs;
  const std::vector<double> fb =
      forward(params, TimeSeries(baseline.values)).outputs;

  SatisfactionReport report;
  report.beta = beta;
  report.residuals = Array(Shape{T, d});
  report.scores.assign(d, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < d; ++k) {
      double cumulative = 0.0;
      for (std::size_t i = 0; i <= t; ++i) cumulative += attributions.at(t, i, k);
      const double h = std::fabs(fx[t] - fb[t] - cumulative);
      report.residuals(t, k) = h;
      report.scores[k] += 1.0 / (1.0 + beta * h);
    }
  }
  for (double& s : report.scores) s /= static_cast<double>(T);
  return report;
}

SatisfactionReport satisfaction(const SeqModelParams& params,
                                const IntegrationPath& path,
                                const AttributionConfig& config) {
  const AttributionTensor a = tig(params, path, config.rule);
  return satisfaction(params, TimeSeries(path.input()),
                      Baseline::user(path.baseline()), a, config.beta);
}

Var satisfaction_scores(const ModelVars& model, const IntegrationPath& path,
                        double beta, RiemannRule rule) {
  require(beta > 0.0, "satisfaction sharpness beta must be positive");
  path.validate();
  Tape& tape = *model.w_hh.tape();
  const std::size_t T = path.baseline().rows(), d = path.baseline().cols();
  const std::size_t M = path.size();
  require(d == model.w_hx.value().cols(),
          "path feature count does not match model");

  // cumulative[t] (d x 1) = sum over segments and i <= t of g * dq.
  std::vector<Var> cumulative(T);
  std::vector<Var> f_baseline, f_input;

  // Per-point input gradients, weighted by the rule.
  auto point_terms = [&](std::size_t j) {
    std::vector<Var> rows = bind_rows(tape, path.points[j]);
    std::vector<Var> outputs = forward(model, rows);
    if (j == 0) f_baseline = outputs;
    if (j + 1 == M) f_input = outputs;
    const bool needs_gradient = (j + 1 < M) || uses_right_end(rule);
    if (!needs_gradient) return;
    for (std::size_t t = 0; t < T; ++t) {
      std::span<const Var> upto(rows.data(), t + 1);
      std::vector<Var> g = tape.gradient(outputs[t], upto);
      for (std::size_t i = 0; i <= t; ++i) {
        // Left end of segment j, right end of segment j - 1.
        Array weight(Shape{d, 1});
        for (std::size_t k = 0; k < d; ++k) {
          double w = 0.0;
          if (j + 1 < M) {
            const double dq = path.points[j + 1](i, k) - path.points[j](i, k);
            w += uses_right_end(rule) ? 0.5 * dq : dq;
          }
          if (uses_right_end(rule) && j > 0) {
            w += 0.5 * (path.points[j](i, k) - path.points[j - 1](i, k));
          }
          weight[k] = w;
        }
        Var term = g[i] * tape.constant(std::move(weight));
        cumulative[t] = cumulative[t].valid() ? cumulative[t] + term : term;
      }
    }
  };

  for (std::size_t j = 0; j < M; ++j) {
    try {
      point_terms(j);
    } catch (const NumericalError& e) {
      throw NumericalError(ood_message(j, e));
    }
  }

  Var total;
  for (std::size_t t = 0; t < T; ++t) {
    Var delta = f_input[t] - f_baseline[t];
    Var residual = abs(delta - cumulative[t]);
    Var score = reciprocal(shift(scale(residual, beta), 1.0));
    total = total.valid() ? total + score : score;
  }
  return scale(total, 1.0 / static_cast<double>(T));
}

std::vector<double> satisfaction_gradient(const SeqModelParams& params,
                                          const IntegrationPath& path,
                                          const AttributionConfig& config,
                                          const std::vector<double>& weights) {
  require(weights.size() == params.features(),
          "one weight per feature is required");
  Tape tape;
  ModelVars model = ModelVars::bind(tape, params);
  Var h = satisfaction_scores(model, path, config.beta, config.rule);
  Var objective = sum(h * tape.constant(Array::column(weights)));
  return flatten_blocks(tape.gradient_values(objective, model.all()));
}

std::vector<double> satisfaction_gradient_fd(const SeqModelParams& params,
                                             const IntegrationPath& path,
                                             const AttributionConfig& config,
                                             const std::vector<double>& weights,
                                             double step) {
  require(weights.size() == params.features(),
          "one weight per feature is required");
  auto objective = [&](const Array& theta) {
    SeqModelParams p = params;
    p.assign(theta.vec());
    const SatisfactionReport r = satisfaction(p, path, config);
    double v = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) v += weights[k] * r.scores[k];
    return v;
  };
  return ndiff::finite_diff(objective, Array::column(params.flatten()), step)
      .vec();
}

void write_attribution_header(std::ostream& out) {
  out << "sample_id,t,i,k,tig\n";
}

void write_attribution_rows(std::ostream& out, std::size_t sample_id,
                            const AttributionTensor& a) {
  for (std::size_t t = 0; t < a.T; ++t) {
    for (std::size_t i = 0; i <= t; ++i) {
      for (std::size_t k = 0; k < a.d; ++k) {
        out << sample_id << ',' << t << ',' << i << ',' << k << ','
            << fmt17(a.at(t, i, k)) << '\n';
      }
    }
  }
}

}  // namespace igbo
