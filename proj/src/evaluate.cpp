#include "igbo/evaluate.hpp"

#include <cmath>
#include <random>

#include "igbo/errors.hpp"
#include "igbo/parallel.hpp"
#include "json.hpp"

namespace igbo {

double dag_satisfaction_rate(const Array& scores, const InterpretabilityDag& dag,
                             std::vector<EdgeCheck>* table) {
  require(scores.shape().rank() == 2 && scores.rows() >= 1,
          "satisfaction rate needs an n x d score matrix");
  const std::size_t n = scores.rows(), d = scores.cols();
  require(dag.nodes.size() == d, "DAG has " + std::to_string(dag.nodes.size()) +
                                     " nodes but the model has " + std::to_string(d) +
                                     " features");
  if (table) table->clear();
  if (dag.edges.empty()) return 1.0;
  std::size_t met = 0;
  for (const DagEdge& e : dag.edges) {
    require(e.src < d && e.dst < d, "DAG edge references an unknown feature");
    double gap = 0.0;
    for (std::size_t b = 0; b < n; ++b) gap += scores(b, e.src) - scores(b, e.dst);
    gap /= double(n);
    const bool ok = gap >= e.eps && gap <= e.delta;
    met += ok;
    if (table) table->push_back({e.src, e.dst, gap, e.eps, e.delta, ok});
  }
  return double(met) / double(dag.edges.size());
}

double mean_squared_error(const SeqModelParams& params,
                          const std::vector<Sample>& samples) {
  require(!samples.empty(), "MSE needs at least one sample");
  std::vector<double> sse(samples.size(), 0.0);
  std::vector<std::size_t> count(samples.size(), 0);
  parallel_for(samples.size(), [&](std::size_t i) {
    const std::vector<double> y = forward(params, samples[i].x).outputs;
    require(y.size() == samples[i].target.size(), "target length must equal series length");
    for (std::size_t t = 0; t < y.size(); ++t) {
      sse[i] += (y[t] - samples[i].target[t]) * (y[t] - samples[i].target[t]);
    }
    count[i] = y.size();
  });
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < sse.size(); ++i) {
    total += sse[i];
    n += count[i];
  }
  return total / double(n);
}

double relative_accuracy_delta(double mse, double reference) {
  require(reference > 0.0, "reference MSE must be positive");
  return (mse - reference) / reference;
}

std::vector<double> feature_std(const std::vector<Sample>& samples) {
  require(!samples.empty(), "feature_std needs at least one sample");
  const std::size_t d = samples.front().x.features();
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  std::size_t n = 0;
  for (const Sample& s : samples) {
    for (std::size_t t = 0; t < s.x.length(); ++t) {
      for (std::size_t k = 0; k < d; ++k) {
        const double x = s.x.values()(t, k);
        sum[k] += x;
        sq[k] += x * x;
      }
      ++n;
    }
  }
  std::vector<double> sd(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    const double mean = sum[k] / double(n);
    const double var = n > 1 ? (sq[k] - double(n) * mean * mean) / double(n - 1) : 0.0;
    sd[k] = std::sqrt(std::max(var, 0.0));
  }
  return sd;
}

double attribution_consistency(const SeqModelParams& params,
                               const std::vector<Sample>& samples,
                               const PathSource& paths,
                               const AttributionConfig& config,
                               const ConsistencyOptions& options) {
  require(options.perturbations >= 2, "consistency needs at least two perturbations");
  const std::vector<double> sd = feature_std(samples);
  const std::size_t J = options.perturbations;
  std::vector<double> per_sample(samples.size(), 0.0);
  parallel_for(samples.size(), [&](std::size_t i) {
    // Per-sample stream so the result does not depend on the worker count.
    std::mt19937_64 rng(options.seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
    std::normal_distribution<double> g(0.0, 1.0);
    const Array& x = samples[i].x.values();
    std::vector<std::vector<double>> tensors;
    for (std::size_t j = 0; j < J; ++j) {
      Array noisy = x;
      for (std::size_t c = 0; c < noisy.size(); ++c) {
        noisy[c] += options.relative_scale * sd[c % sd.size()] * g(rng);
      }
      tensors.push_back(tig(params, make_path(TimeSeries(noisy), paths), config.rule).values.vec());
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < J; ++a) {
      for (std::size_t b = a + 1; b < J; ++b) {
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t c = 0; c < tensors[a].size(); ++c) {
          ab += tensors[a][c] * tensors[b][c];
          aa += tensors[a][c] * tensors[a][c];
          bb += tensors[b][c] * tensors[b][c];
        }
        // Two all-zero tensors agree perfectly.
        total += (aa == 0.0 && bb == 0.0) ? 1.0
                 : (aa == 0.0 || bb == 0.0) ? 0.0
                                            : ab / std::sqrt(aa * bb);
        ++pairs;
      }
    }
    per_sample[i] = total / double(pairs);
  });
  double mean = 0.0;
  for (double v : per_sample) mean += v;
  return mean / double(per_sample.size());
}

std::string EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  j["dag_satisfaction_rate"] = dag_satisfaction_rate;
  j["relative_accuracy_delta"] =
      relative_accuracy_delta ? nlohmann::ordered_json(*relative_accuracy_delta) : nullptr;
  j["attribution_consistency"] = attribution_consistency;
  j["mse"] = mse;
  j["baseline_mse"] = baseline_mse ? nlohmann::ordered_json(*baseline_mse) : nullptr;
  j["interp_loss"] = interp_loss;
  j["path_kind"] = path_kind;
  j["edges"] = nlohmann::ordered_json::array();
  for (const EdgeCheck& e : edges) {
    nlohmann::ordered_json je;
    je["src"] = e.src;
    je["dst"] = e.dst;
    je["gap"] = e.gap;
    je["eps"] = e.eps;
    je["delta"] = e.delta;
    je["satisfied"] = e.satisfied;
    j["edges"].push_back(je);
  }
  return j.dump(2);
}

}  // namespace igbo
