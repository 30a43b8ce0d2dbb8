#include "igbo/datagen.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "igbo/errors.hpp"

namespace igbo {

const char* generator_name(GeneratorKind kind) {
  return kind == GeneratorKind::kBanana ? "banana" : "linear-lag";
}

GeneratorKind parse_generator(const std::string& name) {
  if (name == "linear-lag") return GeneratorKind::kLinearLag;
  if (name == "banana") return GeneratorKind::kBanana;
  throw ContractViolation("unknown generator '" + name +
                          "' (expected linear-lag or banana)");
}

std::vector<double> GeneratorConfig::resolved_coefficients() const {
  if (!coefficients.empty()) return coefficients;
  std::vector<double> c(d, 0.0);
  if (d > 0) c[0] = 2.0;
  if (d > 1) c[1] = 1.0;
  return c;
}

void GeneratorConfig::validate() const {
  require(T >= 2 && d >= 2, "generator needs T >= 2 and d >= 2");
  require(series >= 1, "generator needs at least one series");
  require(resolved_coefficients().size() == d, "need one coefficient per feature");
  require(noise >= 0.0 && std::isfinite(noise), "noise must be finite and nonnegative");
  require(std::isfinite(mu) && std::isfinite(ar), "mu and ar must be finite");
  if (kind == GeneratorKind::kBanana) {
    require(d == 2, "the banana generator is two-dimensional");
    require(spread >= 0.0, "banana spread must be nonnegative");
  }
  if (twin) {
    require(twin_pair.first < d && twin_pair.second < d &&
                twin_pair.first != twin_pair.second,
            "twin pair must name two distinct features");
    require(twin_noise >= 0.0, "twin noise must be nonnegative");
  }
}

std::vector<Sample> generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const std::vector<double> c = cfg.resolved_coefficients();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> arc(0.0, std::numbers::pi);
  const std::size_t T = cfg.T, d = cfg.d;

  std::vector<Sample> out;
  out.reserve(cfg.series);
  for (std::size_t s = 0; s < cfg.series; ++s) {
    Array x(Shape{T, d});
    for (std::size_t t = 0; t < T; ++t) {
      if (cfg.kind == GeneratorKind::kBanana) {
        const double u = arc(rng);
        x(t, 0) = std::cos(u) + cfg.spread * normal(rng);
        x(t, 1) = std::sin(u) + cfg.spread * normal(rng);
        continue;
      }
      for (std::size_t k = 0; k < d; ++k) {
        x(t, k) = (t > 0 ? cfg.ar * x(t - 1, k) : 0.0) + normal(rng);
      }
      if (cfg.twin) {
        x(t, cfg.twin_pair.second) =
            x(t, cfg.twin_pair.first) + cfg.twin_noise * normal(rng);
      }
    }
    std::vector<double> y(T);
    for (std::size_t t = 0; t < T; ++t) {
      double now = 0.0, before = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        now += c[k] * x(t, k);
        if (t >= cfg.lag) before += c[k] * x(t - cfg.lag, k);
      }
      y[t] = now + cfg.mu * std::tanh(before) + cfg.noise * normal(rng);
    }
    out.push_back({TimeSeries(std::move(x)), std::move(y)});
  }
  return out;
}

}  // namespace igbo
