#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "igbo/seqmodel.hpp"

namespace testing {

using igbo::Array;
using igbo::Shape;

inline igbo::TimeSeries random_series(std::mt19937_64& rng, std::size_t T,
                                      std::size_t d, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Array v(Shape{T, d});
  for (double& x : v.values()) x = n(rng);
  return igbo::TimeSeries(v);
}

// y_t = sum_k w_k x_{t,k}; hidden units are inert.
inline igbo::SeqModelParams memoryless_linear(const std::vector<double>& w) {
  igbo::SeqModelParams p = igbo::SeqModelParams::zeros(2, w.size());
  for (std::size_t k = 0; k < w.size(); ++k) p.w[k] = w[k];
  return p;
}

// Elman model with weights scaled up so tanh is visibly nonlinear.
inline igbo::SeqModelParams random_elman(std::size_t h, std::size_t d,
                                         std::uint64_t seed, double gain = 3.0) {
  igbo::SeqModelParams p = igbo::SeqModelParams::init(h, d, seed);
  for (Array* a : p.blocks()) {
    for (double& v : a->values()) v *= gain;
  }
  return p;
}

// max|a - b| / max(max|b|, floor)
inline double rel_inf_error(const std::vector<double>& a,
                            const std::vector<double>& b, double floor = 1e-12) {
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    err = std::max(err, std::fabs(a[i] - b[i]));
    scale = std::max(scale, std::fabs(b[i]));
  }
  return err / std::max(scale, floor);
}

}  // namespace testing
