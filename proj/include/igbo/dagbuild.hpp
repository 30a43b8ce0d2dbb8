#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "igbo/ndiff/array.hpp"

namespace igbo {

using ndiff::Array;
using ndiff::Shape;

double normal_cdf(double z);
// Inverse of normal_cdf on (0, 1), by bisection to double precision.
double normal_quantile(double p);

// Thrown when an edge statistic has zero spread.
class DegenerateStatistic : public std::runtime_error {
 public:
  explicit DegenerateStatistic(const std::string& what)
      : std::runtime_error(what) {}
};

double sample_mean(const std::vector<double>& xs);
// Unbiased (n - 1) divisor; needs at least two values.
double sample_variance(const std::vector<double>& xs);

// Per-batch means of per-sample satisfaction scores.
struct ScoreBatches {
  std::size_t batch_size = 0;   // n
  Array means;                  // N x d, s_k^(i)
  std::vector<Array> samples;   // N arrays of n x d; empty if not retained

  std::size_t batches() const { return means.rows(); }
  std::size_t features() const { return means.cols(); }
  bool has_samples() const { return !samples.empty(); }
  // Unbiased within-batch variance of feature k in batch i.
  double within_variance(std::size_t batch, std::size_t k) const;
  // Grand mean over batches, s-bar_k.
  double grand_mean(std::size_t k) const;
};

// `batches[i]` is n x d, all with the same n >= 2.
ScoreBatches batch_stats(const std::vector<Array>& batches,
                         bool retain_samples = true);

enum class VarianceMode { kAuto, kBetweenBatch, kWithinBatch };
const char* variance_mode_name(VarianceMode mode);
VarianceMode parse_variance_mode(const std::string& name);
// kAuto resolves to between-batch when N >= 8.
VarianceMode resolve_variance_mode(VarianceMode mode, std::size_t batches);

struct EdgeStat {
  std::size_t u = 0;
  std::size_t v = 0;
  double mean_diff = 0.0;    // s-bar_u - s-bar_v
  double sigma = 0.0;        // sd of one batch-mean difference
  double probability = 0.5;  // P(s_u > s_v)
  VarianceMode source = VarianceMode::kBetweenBatch;
  bool bootstrap = false;    // probability came from the bootstrap fallback
};

// Between-batch: sd of the per-batch differences d^(i) (N - 1 divisor).
// Within-batch: sqrt of the mean over batches of Var(H_u - H_v) / n, which
// equals [Var H_u + Var H_v - 2 Cov] / n.
// Throws DegenerateStatistic when sigma is zero.
EdgeStat edge_probability(const ScoreBatches& batches, std::size_t u,
                          std::size_t v, VarianceMode mode);

// Fraction of R resamples of the N per-batch differences (with replacement)
// whose mean is positive.
double bootstrap_probability(const ScoreBatches& batches, std::size_t u,
                             std::size_t v, std::size_t resamples,
                             std::uint64_t seed = 0);

using Edge = std::pair<std::size_t, std::size_t>;

struct AcyclicityResult {
  bool acyclic = true;
  std::vector<std::size_t> order;  // topological order when acyclic
  std::vector<std::size_t> cycle;  // closed walk a, ..., a otherwise
};

// Kahn's algorithm, smallest ready node first.
AcyclicityResult verify_acyclic(std::size_t nodes, const std::vector<Edge>& edges);

class CycleDetected : public std::runtime_error {
 public:
  CycleDetected(const std::string& what, std::vector<std::size_t> cycle)
      : std::runtime_error(what), cycle_(std::move(cycle)) {}
  const std::vector<std::size_t>& cycle() const { return cycle_; }

 private:
  std::vector<std::size_t> cycle_;
};

struct OrientOptions {
  VarianceMode mode = VarianceMode::kAuto;
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = 0;
};

struct Orientation {
  std::vector<EdgeStat> stats;  // one per unordered pair u < v
  std::vector<Edge> edges;      // oriented, u -> v means u scores higher
  std::vector<std::string> decisions;  // per stat: "u->v", "v->u" or "none"
};

// u -> v iff P(s_u > s_v) > alpha; equal means never produce an edge.
// Degenerate pairs fall back to the bootstrap. Throws CycleDetected.
Orientation orient_edges(const ScoreBatches& batches, double alpha,
                         const OrientOptions& options = {});

struct MarginViolation {
  std::size_t u = 0, v = 0;
  double margin = 0.0;    // mean_diff
  double required = 0.0;  // z_alpha * sigma
};

std::vector<MarginViolation> transitivity_check(const ScoreBatches& batches,
                                                double alpha,
                                                const std::vector<Edge>& edges,
                                                VarianceMode mode = VarianceMode::kAuto);

struct DagEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double eps = 0.0;
  double delta = 0.0;
};

// Edge u -> v asserts E[H_u - H_v] in [eps, delta].
struct InterpretabilityDag {
  std::vector<std::string> nodes;
  std::vector<DagEdge> edges;
  double alpha = 0.5;
  std::string provenance;

  std::vector<Edge> pairs() const;
  // Finite, 0 < eps <= delta, known nodes, no self loops or duplicates, acyclic.
  void validate() const;
  std::string to_json() const;
  static InterpretabilityDag from_json(const std::string& text);
};

inline constexpr double kEpsMin = 1e-3;

struct IntervalRule {
  double eps_min = kEpsMin;
  // Overrides for specific oriented edges; passed through unchanged.
  std::map<Edge, std::pair<double, double>> user;
};

struct DagBuild {
  InterpretabilityDag dag;
  Orientation orientation;
  std::vector<DagEdge> dropped;  // intervals that collapsed (eps > delta)
};

DagBuild build_dag(const ScoreBatches& batches, double alpha,
                   const IntervalRule& rule,
                   const std::vector<std::string>& names,
                   const OrientOptions& options = {});

// CSV (u, v, mean_diff, sigma, prob, decision).
void write_edge_stats(std::ostream& out, const Orientation& orientation);

std::vector<std::string> default_feature_names(std::size_t d);

}  // namespace igbo
