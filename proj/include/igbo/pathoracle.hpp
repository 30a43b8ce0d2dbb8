#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "igbo/attribution.hpp"
#include "igbo/biopt.hpp"
#include "igbo/seqmodel.hpp"

namespace igbo {

// Recurrent anchor generator. With P = T * d and r = K - i + 1 steps left,
// the cell input is z_i = [1/r, X, p_{i-1}, (X - p_{i-1}) / (r + 1)] and
//   p_i = V z_i + U h_{i-1} + c
//   h_i = tanh(W_hh h_{i-1} + W_hz z_i + b)
// starting from p_0 = X', h_0 = 0.
struct OracleParams {
  std::size_t T = 0;
  std::size_t d = 0;
  Array w_hh;  // width x width
  Array w_hz;  // width x (3P + 1)
  Array b;     // width x 1
  Array v;     // P x (3P + 1)
  Array u;     // P x width
  Array c;     // P x 1

  std::size_t width() const { return w_hh.rows(); }
  std::size_t point_size() const { return T * d; }
  std::size_t parameter_count() const;

  static OracleParams zeros(std::size_t T, std::size_t d, std::size_t width);
  // Starts on the straight line: V copies p_{i-1} plus the scaled remaining
  // step and U = 0, so anchors are evenly spaced on the chord. The hidden
  // weights are small and random so U has something to learn from.
  static OracleParams init(std::size_t T, std::size_t d, std::size_t width,
                           std::uint64_t seed);

  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
  void validate() const;
  static const std::vector<std::string>& names();
  std::vector<const Array*> blocks() const;
  std::vector<Array*> blocks();
};

inline constexpr std::size_t kDefaultOracleWidth = 16;

struct OracleVars {
  Var w_hh, w_hz, b, v, u, c;
  std::size_t T = 0, d = 0;
  static OracleVars bind(Tape& tape, const OracleParams& params);
  std::vector<Var> all() const { return {w_hh, w_hz, b, v, u, c}; }
};

// K anchors, each T x d.
std::vector<Array> generate_anchors(const OracleParams& oracle,
                                    const Array& baseline, const Array& x,
                                    std::size_t K);
// Tape form; anchors are P x 1 columns (row-major flattening of T x d).
std::vector<Var> generate_anchors(const OracleVars& oracle,
                                  const Array& baseline, const Array& x,
                                  std::size_t K);

// [X', p_1..p_K, X] plus M - K - 2 points spread over the K + 1 segments in
// proportion to their lengths (largest remainder), evenly within a segment.
IntegrationPath expand_points(const std::vector<Array>& anchors,
                              const Array& baseline, const Array& x,
                              std::size_t M);

// (|X' - p_1|^2 + |X - p_K|^2 + sum |p_{i+1} - p_i|^2) / (K + 1)
double path_loss(const std::vector<Array>& anchors, const Array& baseline,
                 const Array& x);
Var path_loss(const std::vector<Var>& anchors, const Array& baseline,
              const Array& x);

// Frozen scorer of how in-distribution a T x d point is, with scores in
// [floor, 1]. Implementations must be deterministic and side-effect free.
class ValidityAssessor {
 public:
  virtual ~ValidityAssessor() = default;
  virtual double log_score(const Array& point) const = 0;
  // `point` is a P x 1 column; result is 1 x 1.
  virtual Var log_score(Var point) const = 0;
  virtual double floor() const = 0;
  double score(const Array& point) const;
};

inline constexpr double kAssessorFloor = 1e-4;
inline constexpr double kAssessorMedian = 0.9;
inline constexpr double kScaleFloor = 1e-6;

// Diagonal Gaussian with per-feature statistics pooled over time steps:
//   log D(p) = clamp(-0.5 mean_{t,k} ((p_{t,k} - mu_k) / s_k)^2 + offset,
//                    log floor, 0)
// where `offset` puts the median training score at 0.9.
class GaussianAssessor : public ValidityAssessor {
 public:
  GaussianAssessor() = default;
  GaussianAssessor(std::vector<double> mean, std::vector<double> scale,
                   double offset, double floor = kAssessorFloor);

  static GaussianAssessor fit(const std::vector<TimeSeries>& dataset,
                              double floor = kAssessorFloor);

  double log_score(const Array& point) const override;
  Var log_score(Var point) const override;
  double floor() const override { return floor_; }

  bool fitted() const { return !mean_.empty(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }
  double offset() const { return offset_; }

  std::string to_json() const;
  static GaussianAssessor from_json(const std::string& text);

 private:
  double raw(const Array& point) const;
  std::vector<double> mean_, scale_;
  double offset_ = 0.0;
  double floor_ = kAssessorFloor;
};

// -(1/K) sum_i log D(p_i)
double validity_loss(const std::vector<Array>& anchors,
                     const ValidityAssessor& assessor);
Var validity_loss(const std::vector<Var>& anchors,
                  const ValidityAssessor& assessor);

struct OracleConfig {
  std::size_t K = 3;
  LambdaSchedule schedule = LambdaSchedule::fixed(0.5);
  double eta = 0.05;
  std::size_t epochs = 30;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  double eps_term = 0.0;  // 0: default_eps_term(parameter count)
};

struct OracleHistoryRow {
  std::size_t step = 0;
  double path_loss = 0.0;
  double validity_loss = 0.0;
  ProjectionCase which = ProjectionCase::kAligned;
  double lambda = 0.0;
  double dot_g1 = 0.0;
  double dot_g2 = 0.0;
};

struct OracleTraining {
  OracleParams oracle;
  std::vector<OracleHistoryRow> history;
};

// Pairs are (X', X). Each step averages both loss gradients over a batch and
// combines them with the projection rule; terminal cases fall back to the
// remaining gradient or skip the step.
OracleTraining train_oracle(OracleParams oracle, const ValidityAssessor& assessor,
                            const std::vector<std::pair<Array, Array>>& pairs,
                            const OracleConfig& config);

void write_oracle_history(std::ostream& out,
                          const std::vector<OracleHistoryRow>& history);

// Straight-line counterpart of K anchors: evenly spaced chord points.
std::vector<Array> chord_anchors(const Array& baseline, const Array& x,
                                 std::size_t K);

}  // namespace igbo
