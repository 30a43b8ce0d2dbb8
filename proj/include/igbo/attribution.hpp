#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "igbo/seqmodel.hpp"

namespace igbo {

enum class PathProvenance { kLinear, kOracle };

// Points q_1..q_M, each T x d. q_1 is the baseline and q_M the input.
struct IntegrationPath {
  std::vector<Array> points;
  PathProvenance provenance = PathProvenance::kLinear;

  std::size_t size() const { return points.size(); }
  const Array& baseline() const { return points.front(); }
  const Array& input() const { return points.back(); }
  void validate() const;
};

IntegrationPath linear_path(const TimeSeries& x, const Baseline& baseline,
                            std::size_t points);

// values[(t * T + i) * d + k]: attribution of input cell (i, k) to output t.
struct AttributionTensor {
  std::size_t T = 0;
  std::size_t d = 0;
  Array values;

  double at(std::size_t t, std::size_t i, std::size_t k) const {
    return values[(t * T + i) * d + k];
  }
};

enum class RiemannRule { kLeft, kTrapezoid };

inline constexpr double kDefaultBeta = 5.0;

struct AttributionConfig {
  std::size_t points = 32;  // M
  RiemannRule rule = RiemannRule::kLeft;
  double beta = kDefaultBeta;
};

// Per-output path integral of input gradients, discretised by `rule`.
// Throws NumericalError("OOD gradient at path point j ...") with 1-based j.
AttributionTensor tig(const SeqModelParams& params, const IntegrationPath& path,
                      RiemannRule rule = RiemannRule::kLeft);

struct SatisfactionReport {
  Array residuals;              // T x d, h_{t,k}
  std::vector<double> scores;   // H_k
  double beta = kDefaultBeta;
};

SatisfactionReport satisfaction(const SeqModelParams& params,
                                const TimeSeries& x, const Baseline& baseline,
                                const AttributionTensor& attributions,
                                double beta);

// Convenience: tig + satisfaction on the path's own endpoints.
SatisfactionReport satisfaction(const SeqModelParams& params,
                                const IntegrationPath& path,
                                const AttributionConfig& config);

// Graph form. Records the whole computation, including the input gradients
// at every path point, on the model's tape. Returns H as a d x 1 variable
// that can be differentiated with respect to the model leaves.
Var satisfaction_scores(const ModelVars& model, const IntegrationPath& path,
                        double beta, RiemannRule rule = RiemannRule::kLeft);

// Gradient of sum_k weights[k] * H_k over the flattened parameters.
std::vector<double> satisfaction_gradient(const SeqModelParams& params,
                                          const IntegrationPath& path,
                                          const AttributionConfig& config,
                                          const std::vector<double>& weights);
// Central-difference fallback for the same quantity.
std::vector<double> satisfaction_gradient_fd(const SeqModelParams& params,
                                             const IntegrationPath& path,
                                             const AttributionConfig& config,
                                             const std::vector<double>& weights,
                                             double step = 1e-5);

// Rows (sample_id, t, i, k, tig); i runs over 0..t only.
void write_attribution_header(std::ostream& out);
void write_attribution_rows(std::ostream& out, std::size_t sample_id,
                            const AttributionTensor& attributions);

}  // namespace igbo
