#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "igbo/seqmodel.hpp"

namespace igbo {

enum class GeneratorKind { kLinearLag, kBanana };
const char* generator_name(GeneratorKind kind);
GeneratorKind parse_generator(const std::string& name);

// Targets follow
//   y_t = sum_k c_k x_{t,k} + mu tanh(sum_k c_k x_{t-lag,k}) + noise eps_t
// with x_{s,k} = 0 for s < 0.
//
// linear-lag: x_{t,k} = ar x_{t-1,k} + N(0, 1). A twin pair (a, b) replaces
//   feature b with x_{t,a} + twin_noise N(0, 1), giving correlated inputs.
// banana: d = 2 and each row lies on the arc (cos u, sin u) for u in
//   [0, pi], plus isotropic jitter of size `spread`.
struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::kLinearLag;
  std::size_t series = 200;
  std::size_t T = 8;
  std::size_t d = 3;
  std::vector<double> coefficients;  // empty: 2, 1, 0, 0, ...
  double mu = 0.0;
  std::size_t lag = 1;
  double noise = 0.1;
  double ar = 0.0;
  bool twin = false;
  std::pair<std::size_t, std::size_t> twin_pair{0, 1};
  double twin_noise = 0.1;
  double spread = 0.05;
  std::uint64_t seed = 0;

  std::vector<double> resolved_coefficients() const;
  void validate() const;
};

std::vector<Sample> generate(const GeneratorConfig& config);

}  // namespace igbo
