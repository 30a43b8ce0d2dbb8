#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "igbo/dagbuild.hpp"
#include "igbo/training.hpp"

namespace igbo {

struct EdgeCheck {
  std::size_t src = 0, dst = 0;
  double gap = 0.0;  // mean over samples of H_src - H_dst
  double eps = 0.0, delta = 0.0;
  bool satisfied = false;
};

// Fraction of edges whose gap over all rows of `scores` lies in [eps, delta];
// 1 for an edgeless DAG.
double dag_satisfaction_rate(const Array& scores, const InterpretabilityDag& dag,
                             std::vector<EdgeCheck>* table = nullptr);

double mean_squared_error(const SeqModelParams& params,
                          const std::vector<Sample>& samples);

// (mse - reference) / reference
double relative_accuracy_delta(double mse, double reference);

// Pooled per-feature standard deviation over every series and time step.
std::vector<double> feature_std(const std::vector<Sample>& samples);

struct ConsistencyOptions {
  std::size_t perturbations = 8;  // J
  double relative_scale = 0.01;   // noise sd as a fraction of each feature's sd
  std::uint64_t seed = 0;
};

// Mean over samples of the mean pairwise cosine similarity between the
// flattened TIG tensors of J perturbed copies. Paths are rebuilt for every
// copy, so oracle paths follow the perturbed input.
double attribution_consistency(const SeqModelParams& params,
                               const std::vector<Sample>& samples,
                               const PathSource& paths,
                               const AttributionConfig& config,
                               const ConsistencyOptions& options = {});

struct EvaluationReport {
  double dag_satisfaction_rate = 1.0;
  std::optional<double> relative_accuracy_delta;
  double attribution_consistency = 0.0;
  double mse = 0.0;
  std::optional<double> baseline_mse;
  double interp_loss = 0.0;  // mean batch loss over the seeded partition
  std::string path_kind;     // "linear" or "oracle"
  std::vector<EdgeCheck> edges;

  std::string to_json() const;
};

}  // namespace igbo
