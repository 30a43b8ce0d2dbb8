#include "igbo/biopt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "igbo/errors.hpp"

namespace igbo {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

GradientPair::GradientPair(std::vector<double> g1, std::vector<double> g2)
    : g1_(std::move(g1)), g2_(std::move(g2)) {
  require(g1_.size() == g2_.size(), "gradient pair lengths differ");
  require(!g1_.empty(), "gradient pair is empty");
  dot_ = igbo::dot(g1_, g2_);
  norm1_ = norm(g1_);
  norm2_ = norm(g2_);
  require(std::isfinite(dot_) && std::isfinite(norm1_) && std::isfinite(norm2_),
          "gradient pair contains non-finite entries");
}

const char* case_name(ProjectionCase c) {
  switch (c) {
    case ProjectionCase::kAligned: return "Aligned";
    case ProjectionCase::kConflicting: return "Conflicting";
    case ProjectionCase::kMaxConflict: return "MaxConflict";
    case ProjectionCase::kG1Negligible: return "G1Negligible";
    case ProjectionCase::kG2Negligible: return "G2Negligible";
  }
  return "?";
}

ProjectionCase parse_case(const std::string& name) {
  for (ProjectionCase c :
       {ProjectionCase::kAligned, ProjectionCase::kConflicting,
        ProjectionCase::kMaxConflict, ProjectionCase::kG1Negligible,
        ProjectionCase::kG2Negligible}) {
    if (name == case_name(c)) return c;
  }
  throw ContractViolation("unknown projection case '" + name + "'");
}

ProjectionCase classify_case(const GradientPair& pair, double eps_term) {
  require(eps_term > 0.0, "eps_term must be positive");
  if (pair.norm1() < eps_term) return ProjectionCase::kG1Negligible;
  if (pair.norm2() < eps_term) return ProjectionCase::kG2Negligible;
  if (pair.dot() <= -(1.0 - kMaxConflictTolerance) * pair.norm1() * pair.norm2()) {
    return ProjectionCase::kMaxConflict;
  }
  return pair.dot() >= 0.0 ? ProjectionCase::kAligned
                           : ProjectionCase::kConflicting;
}

ProjectionResult project(const GradientPair& pair, double lambda,
                         double eps_term) {
  require(lambda > 0.0 && lambda < 1.0, "lambda must lie in (0, 1)");
  const ProjectionCase which = classify_case(pair, eps_term);
  require(!is_terminal(which),
          std::string("project() called on terminal case ") + case_name(which));
  const auto& g1 = pair.g1();
  const auto& g2 = pair.g2();
  const std::size_t n = pair.size();
  ProjectionResult r;
  r.which = which;
  r.lambda = lambda;
  r.direction.resize(n);
  if (which == ProjectionCase::kAligned) {
    for (std::size_t i = 0; i < n; ++i) {
      r.direction[i] = lambda * g1[i] + (1.0 - lambda) * g2[i];
    }
  } else {
    const double c1 = pair.dot() / (pair.norm1() * pair.norm1());
    const double c2 = pair.dot() / (pair.norm2() * pair.norm2());
    r.g2_perp1.resize(n);
    r.g1_perp2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      r.g2_perp1[i] = g2[i] - c1 * g1[i];
      r.g1_perp2[i] = g1[i] - c2 * g2[i];
      r.direction[i] = lambda * r.g2_perp1[i] + (1.0 - lambda) * r.g1_perp2[i];
    }
  }
  r.dot_g1 = dot(r.direction, g1);
  r.dot_g2 = dot(r.direction, g2);
  return r;
}

Parameterization parameterize(const GradientPair& pair, double alpha,
                              double beta) {
  require(alpha > 0.0 && beta > 0.0, "alpha and beta must be positive");
  const double a = pair.norm1() * pair.norm1();
  const double b = pair.norm2() * pair.norm2();
  const double c = pair.dot();
  require(a > 0.0 && b > 0.0, "parameterize needs nonzero gradients");
  if (c >= 0.0) return {alpha / (alpha + beta), alpha + beta};
  // Coefficients of g1 and g2 in eta * (lambda g2_perp1 + (1-lambda) g1_perp2):
  //   eta * (1 - lambda - lambda c / a) = alpha
  //   eta * (lambda - (1 - lambda) c / b) = beta
  const double lambda =
      (beta * a * b + alpha * a * c) / ((alpha + beta) * a * b + c * (alpha * a + beta * b));
  const double eta = alpha / (1.0 - lambda - lambda * c / a);
  return {lambda, eta};
}

std::pair<double, double> naive_feasible_interval(const GradientPair& pair) {
  const double c = pair.dot();
  if (c >= 0.0) return {0.0, 1.0};
  const double a = pair.norm1() * pair.norm1();
  const double b = pair.norm2() * pair.norm2();
  return {-c / (a - c), b / (b - c)};
}

LambdaSchedule LambdaSchedule::fixed(double value) {
  return {ScheduleKind::kFixed, value, value, 1};
}

LambdaSchedule LambdaSchedule::linear(double from, double to, std::size_t steps) {
  require(steps >= 1, "linear lambda schedule needs at least one step");
  return {ScheduleKind::kLinear, from, to, steps};
}

LambdaSchedule LambdaSchedule::dynamic() {
  return {ScheduleKind::kDynamic, 0.5, 0.5, 1};
}

LambdaSchedule LambdaSchedule::parse(const std::string& spec) {
  if (spec == "dynamic") return dynamic();
  std::vector<std::string> parts;
  std::stringstream in(spec);
  for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
  try {
    if (parts.size() == 1) return fixed(std::stod(parts[0]));
    if (parts.size() == 4 && parts[0] == "linear") {
      return linear(std::stod(parts[1]), std::stod(parts[2]),
                    static_cast<std::size_t>(std::stoul(parts[3])));
    }
  } catch (const std::logic_error&) {
    // Falls through to the diagnostic below.
  }
  throw ContractViolation("bad lambda schedule '" + spec +
                          "' (expected a number, linear:A:B:S or dynamic)");
}

std::string LambdaSchedule::str() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind) {
    case ScheduleKind::kFixed: out << start; break;
    case ScheduleKind::kLinear:
      out << "linear:" << start << ':' << end << ':' << span;
      break;
    case ScheduleKind::kDynamic: out << "dynamic"; break;
  }
  return out.str();
}

LambdaValue lambda_at(const LambdaSchedule& s, std::size_t step,
                      const GradientPair& pair) {
  double raw = s.start;
  switch (s.kind) {
    case ScheduleKind::kFixed: break;
    case ScheduleKind::kLinear: {
      const double frac = static_cast<double>(std::min(step, s.span)) /
                          static_cast<double>(s.span);
      raw = s.start + (s.end - s.start) * frac;
      break;
    }
    case ScheduleKind::kDynamic: {
      const double total = pair.norm1() + pair.norm2();
      raw = total > 0.0 ? pair.norm2() / total : 0.5;
      return {std::clamp(raw, kDynamicLow, kDynamicHigh), false};
    }
  }
  if (!(raw > 0.0 && raw < 1.0)) {
    const double safe = std::isfinite(raw) ? raw : 0.5;
    return {std::clamp(safe, kLambdaFloor, 1.0 - kLambdaFloor), true};
  }
  return {raw, false};
}

NoiseProbe projection_noise(const GradientPair& pair, double lambda,
                            double sigma2, std::size_t batch, std::size_t draws,
                            std::uint64_t seed) {
  require(sigma2 > 0.0 && batch >= 1 && draws >= 2,
          "noise probe needs sigma2 > 0, batch >= 1 and draws >= 2");
  const ProjectionCase clean = classify_case(pair, 1e-12);
  require(!is_terminal(clean), "noise probe needs a non-terminal pair");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(
      0.0, std::sqrt(sigma2 / static_cast<double>(batch)));
  const std::size_t n = pair.size();
  std::vector<double> mean(n, 0.0), m2(n, 0.0);
  NoiseProbe out;
  out.batch = batch;
  std::size_t kept = 0;
  std::vector<double> g1(n), g2(n);
  for (std::size_t r = 0; r < draws; ++r) {
    for (std::size_t i = 0; i < n; ++i) g1[i] = pair.g1()[i] + noise(rng);
    for (std::size_t i = 0; i < n; ++i) g2[i] = pair.g2()[i] + noise(rng);
    GradientPair noisy(g1, g2);
    const ProjectionCase which = classify_case(noisy, 1e-12);
    if (which != clean) ++out.case_changes;
    if (is_terminal(which)) {
      ++out.skipped;
      continue;
    }
    const std::vector<double> v = project(noisy, lambda).direction;
    ++kept;
    // Welford update per coordinate.
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = v[i] - mean[i];
      mean[i] += delta / static_cast<double>(kept);
      m2[i] += delta * (v[i] - mean[i]);
    }
  }
  require(kept >= 2, "noise probe: too few non-terminal draws");
  for (double m : m2) out.variance += m / static_cast<double>(kept - 1);
  return out;
}

double default_eps_term(std::size_t parameter_count) {
  return 1e-8 * std::sqrt(static_cast<double>(std::max<std::size_t>(1, parameter_count)));
}

}  // namespace igbo
