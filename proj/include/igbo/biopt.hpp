#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace igbo {

// Two flat gradients with their inner products computed here, never taken
// from the caller.
class GradientPair {
 public:
  GradientPair(std::vector<double> g1, std::vector<double> g2);

  const std::vector<double>& g1() const { return g1_; }
  const std::vector<double>& g2() const { return g2_; }
  double dot() const { return dot_; }
  double norm1() const { return norm1_; }
  double norm2() const { return norm2_; }
  std::size_t size() const { return g1_.size(); }

 private:
  std::vector<double> g1_, g2_;
  double dot_ = 0.0, norm1_ = 0.0, norm2_ = 0.0;
};

enum class ProjectionCase {
  kAligned,
  kConflicting,
  kMaxConflict,
  kG1Negligible,
  kG2Negligible,
};

const char* case_name(ProjectionCase c);
ProjectionCase parse_case(const std::string& name);
inline bool is_terminal(ProjectionCase c) {
  return c != ProjectionCase::kAligned && c != ProjectionCase::kConflicting;
}

inline constexpr double kMaxConflictTolerance = 1e-12;

// Negligibility is checked before the sign of g1 . g2.
ProjectionCase classify_case(const GradientPair& pair, double eps_term);

struct ProjectionResult {
  std::vector<double> direction;
  ProjectionCase which = ProjectionCase::kAligned;
  double dot_g1 = 0.0;  // v . g1
  double dot_g2 = 0.0;  // v . g2
  double lambda = 0.5;
  // Filled in the conflicting case only.
  std::vector<double> g2_perp1;  // g2 minus its projection on g1
  std::vector<double> g1_perp2;  // g1 minus its projection on g2
};

// Aligned: v = lambda g1 + (1 - lambda) g2.
// Conflicting: v = lambda g2_perp1 + (1 - lambda) g1_perp2.
// `eps_term` is only used to reject terminal cases.
ProjectionResult project(const GradientPair& pair, double lambda,
                         double eps_term = 1e-12);

// Solves eta * P(g1, g2, lambda) = alpha g1 + beta g2 for (lambda, eta).
// Requires a non-terminal pair; in the conflicting case the target must be
// a strict simultaneous-descent direction for lambda to land in (0, 1).
struct Parameterization {
  double lambda = 0.0;
  double eta = 0.0;
};
Parameterization parameterize(const GradientPair& pair, double alpha,
                              double beta);

// Open interval of lambda for which the naive convex combination
// lambda g1 + (1 - lambda) g2 descends on both objectives. (0, 1) when the
// gradients do not conflict.
std::pair<double, double> naive_feasible_interval(const GradientPair& pair);

enum class ScheduleKind { kFixed, kLinear, kDynamic };

struct LambdaSchedule {
  ScheduleKind kind = ScheduleKind::kFixed;
  double start = 0.5;     // fixed value, or linear start
  double end = 0.5;       // linear end
  std::size_t span = 1;   // linear: steps to reach `end`

  static LambdaSchedule fixed(double value);
  static LambdaSchedule linear(double from, double to, std::size_t steps);
  static LambdaSchedule dynamic();
  // "0.5", "linear:0.9:0.1:100", "dynamic"
  static LambdaSchedule parse(const std::string& spec);
  std::string str() const;
};

struct LambdaValue {
  double lambda = 0.5;
  bool clamped = false;  // the raw value fell outside (0, 1)
};

inline constexpr double kLambdaFloor = 1e-6;
inline constexpr double kDynamicLow = 0.05;
inline constexpr double kDynamicHigh = 0.95;

LambdaValue lambda_at(const LambdaSchedule& schedule, std::size_t step,
                      const GradientPair& pair);

// Monte Carlo spread of P under gradient noise: each draw adds independent
// N(0, sigma2 / batch) noise to every coordinate of g1 and g2 and projects.
// `variance` is the summed per-coordinate sample variance of the direction.
struct NoiseProbe {
  std::size_t batch = 0;
  double variance = 0.0;
  std::size_t case_changes = 0;  // draws whose case differs from the clean pair
  std::size_t skipped = 0;       // terminal draws, excluded from the variance
};
NoiseProbe projection_noise(const GradientPair& pair, double lambda,
                            double sigma2, std::size_t batch, std::size_t draws,
                            std::uint64_t seed);

// eps_term scaled by sqrt(parameter count).
double default_eps_term(std::size_t parameter_count);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm(const std::vector<double>& a);

}  // namespace igbo
