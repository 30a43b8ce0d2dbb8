#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "igbo/attribution.hpp"
#include "igbo/biopt.hpp"
#include "igbo/dagbuild.hpp"
#include "igbo/pathoracle.hpp"
#include "igbo/seqmodel.hpp"

namespace igbo {

struct EdgePenaltyReport {
  std::vector<double> gaps;       // d_{u,v}, one per DAG edge
  std::vector<double> penalties;  // max(eps - d, 0) + max(d - delta, 0)
  double total = 0.0;             // mean penalty; 0 for an edgeless DAG
  Array score_gradient;           // |B| x d, d total / d H_{b,k}
};

// `scores` is |B| x d with H_{b,k} in row b. Edge u -> v uses
// d = mean_b (H_{b,u} - H_{b,v}). Kinks get subgradient 0.
EdgePenaltyReport interp_loss(const Array& scores, const InterpretabilityDag& dag);
// Tape form over per-sample d x 1 score columns.
Var interp_loss(const std::vector<Var>& scores, const InterpretabilityDag& dag);

// Integration path per sample, from the baseline to the series. An oracle
// with K anchors gives piecewise paths; otherwise paths are straight.
struct PathSource {
  Baseline baseline;
  std::size_t points = 32;
  const OracleParams* oracle = nullptr;
  std::size_t anchors = 3;
};

IntegrationPath make_path(const TimeSeries& x, const PathSource& source);
std::vector<IntegrationPath> make_paths(const std::vector<Sample>& samples,
                                        const PathSource& source);

// Per-sample satisfaction scores, |B| x d.
Array batch_scores(const SeqModelParams& params,
                   const std::vector<const IntegrationPath*>& paths,
                   const AttributionConfig& config);

struct StepOptions {
  double eta = 0.01;
  LambdaSchedule schedule = LambdaSchedule::fixed(0.5);
  AttributionConfig attribution;
  double eps_term = 0.0;  // 0: default_eps_term(parameter count)
};

struct StepRecord {
  std::size_t step = 0;
  double task_loss = 0.0;
  double interp_loss = 0.0;
  ProjectionCase which = ProjectionCase::kAligned;
  double lambda = 0.0;
  double dot_g1 = 0.0;  // v . grad task loss
  double dot_g2 = 0.0;  // v . grad interpretability loss
  double eta = 0.0;
  bool lambda_clamped = false;
  bool skipped = false;  // MaxConflict: no update
};

// Losses and both gradients at `params` on one batch.
struct BatchObjectives {
  double task_loss = 0.0;
  double interp_loss = 0.0;
  std::vector<double> task_gradient;
  std::vector<double> interp_gradient;
};

BatchObjectives batch_objectives(const SeqModelParams& params,
                                 const std::vector<const Sample*>& batch,
                                 const std::vector<const IntegrationPath*>& paths,
                                 const InterpretabilityDag& dag,
                                 const AttributionConfig& config);

// One projected update, in place. Throws NumericalError on non-finite losses.
StepRecord train_step(SeqModelParams& params,
                      const std::vector<const Sample*>& batch,
                      const std::vector<const IntegrationPath*>& paths,
                      const InterpretabilityDag& dag, const StepOptions& options,
                      std::size_t step);

// Indices 0..n-1 shuffled once by `seed` and cut into consecutive batches;
// the last batch may be shorter.
std::vector<std::vector<std::size_t>> partition_batches(std::size_t n,
                                                        std::size_t batch_size,
                                                        std::uint64_t seed);

struct TrainConfig {
  StepOptions step;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // steps; 0 disables
  std::function<void(std::size_t, const SeqModelParams&)> on_checkpoint;
};

struct FinalSummary {
  double task_loss = 0.0;    // MSE over the whole training set
  double interp_loss = 0.0;  // mean of the batch losses over the partition
};

struct TrainResult {
  SeqModelParams params;
  std::vector<StepRecord> history;
  FinalSummary final;
};

TrainResult train(SeqModelParams params, const std::vector<Sample>& samples,
                  const std::vector<IntegrationPath>& paths,
                  const InterpretabilityDag& dag, const TrainConfig& config);

// Mean over the batches of `partition` of the batch interpretability loss.
double partition_interp_loss(const SeqModelParams& params,
                             const std::vector<IntegrationPath>& paths,
                             const std::vector<std::vector<std::size_t>>& partition,
                             const InterpretabilityDag& dag,
                             const AttributionConfig& config);

// step,task_loss,interp_loss,case,lambda,dot_g1,dot_g2,eta and a closing
// "final" row.
void write_history(std::ostream& out, const std::vector<StepRecord>& history,
                   const std::optional<FinalSummary>& final = std::nullopt);

}  // namespace igbo
