#include "igbo/pathoracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "igbo/errors.hpp"
#include "igbo/format.hpp"
#include "igbo/parallel.hpp"
#include "json.hpp"

namespace igbo {

namespace {

Array as_column(const Array& point) {
  return Array(Shape{point.size(), 1}, point.vec());
}

Array as_point(const Array& column, std::size_t T, std::size_t d) {
  return Array(Shape{T, d}, column.vec());
}

void require_point(const Array& a, std::size_t T, std::size_t d,
                   const char* what) {
  require(a.shape() == Shape({T, d}),
          std::string(what) + " must be " + std::to_string(T) + " x " +
              std::to_string(d) + ", got " + a.shape().str());
}

double squared_distance(const Array& a, const Array& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::size_t OracleParams::parameter_count() const {
  std::size_t n = 0;
  for (const Array* a : blocks()) n += a->size();
  return n;
}

OracleParams OracleParams::zeros(std::size_t T, std::size_t d,
                                 std::size_t width) {
  require(T >= 1 && d >= 1 && width >= 1,
          "oracle needs T >= 1, d >= 1 and width >= 1");
  const std::size_t P = T * d, Z = 3 * P + 1;
  OracleParams o;
  o.T = T;
  o.d = d;
  o.w_hh = Array(Shape{width, width});
  o.w_hz = Array(Shape{width, Z});
  o.b = Array(Shape{width, 1});
  o.v = Array(Shape{P, Z});
  o.u = Array(Shape{P, width});
  o.c = Array(Shape{P, 1});
  return o;
}

OracleParams OracleParams::init(std::size_t T, std::size_t d,
                                std::size_t width, std::uint64_t seed) {
  OracleParams o = zeros(T, d, width);
  const std::size_t P = T * d;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> wh(-0.5 / std::sqrt(double(width)),
                                            0.5 / std::sqrt(double(width)));
  const double zb = 0.5 / std::sqrt(double(3 * P + 1));
  std::uniform_real_distribution<double> wz(-zb, zb);
  for (double& x : o.w_hh.values()) x = wh(rng);
  for (double& x : o.w_hz.values()) x = wz(rng);
  for (double& x : o.b.values()) x = wh(rng);
  // z = [1/r | X | p_{i-1} | step]; p_i = p_{i-1} + step.
  for (std::size_t i = 0; i < P; ++i) {
    o.v(i, 1 + P + i) = 1.0;
    o.v(i, 1 + 2 * P + i) = 1.0;
  }
  return o;
}

const std::vector<std::string>& OracleParams::names() {
  static const std::vector<std::string> kNames = {"w_hh", "w_hz", "b",
                                                  "v",    "u",    "c"};
  return kNames;
}

std::vector<const Array*> OracleParams::blocks() const {
  return {&w_hh, &w_hz, &b, &v, &u, &c};
}

std::vector<Array*> OracleParams::blocks() {
  return {&w_hh, &w_hz, &b, &v, &u, &c};
}

std::vector<double> OracleParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Array* a : blocks()) {
    flat.insert(flat.end(), a->vec().begin(), a->vec().end());
  }
  return flat;
}

void OracleParams::assign(const std::vector<double>& flat) {
  require(flat.size() == parameter_count(),
          "flat oracle vector has the wrong length");
  std::size_t offset = 0;
  for (Array* a : blocks()) {
    for (double& x : a->values()) x = flat[offset++];
  }
}

void OracleParams::validate() const {
  require(T >= 1 && d >= 1, "oracle needs T >= 1 and d >= 1");
  const std::size_t n = width(), P = T * d, Z = 3 * P + 1;
  require(n >= 1, "oracle width must be positive");
  require(w_hh.shape() == Shape({n, n}), "oracle w_hh must be width x width");
  require(w_hz.shape() == Shape({n, Z}), "oracle w_hz must be width x (3P + 1)");
  require(b.shape() == Shape({n, 1}), "oracle b must be width x 1");
  require(v.shape() == Shape({P, Z}), "oracle v must be P x (3P + 1)");
  require(u.shape() == Shape({P, n}), "oracle u must be P x width");
  require(c.shape() == Shape({P, 1}), "oracle c must be P x 1");
  for (const Array* a : blocks()) {
    require(a->all_finite(), "oracle parameters must be finite");
  }
}

OracleVars OracleVars::bind(Tape& tape, const OracleParams& p) {
  return {tape.leaf(p.w_hh), tape.leaf(p.w_hz), tape.leaf(p.b),
          tape.leaf(p.v),    tape.leaf(p.u),    tape.leaf(p.c),
          p.T,               p.d};
}

std::vector<Var> generate_anchors(const OracleVars& oracle,
                                  const Array& baseline, const Array& x,
                                  std::size_t K) {
  require(K >= 1, "oracle needs K >= 1 anchors");
  require_point(baseline, oracle.T, oracle.d, "baseline");
  require_point(x, oracle.T, oracle.d, "input");
  Tape& tape = *oracle.v.tape();
  const std::size_t width = oracle.w_hh.value().rows();
  Var target = tape.constant(as_column(x));
  Var p = tape.constant(as_column(baseline));
  Var h = tape.constant(Array(Shape{width, 1}));
  std::vector<Var> anchors;
  anchors.reserve(K);
  for (std::size_t i = 1; i <= K; ++i) {
    const double r = static_cast<double>(K - i + 1);
    const Var parts[] = {tape.constant(Array::scalar(1.0 / r)), target, p,
                         scale(target - p, 1.0 / (r + 1.0))};
    Var z = concat_rows(parts);
    p = matmul(oracle.v, z) + matmul(oracle.u, h) + oracle.c;
    h = tanh(matmul(oracle.w_hh, h) + matmul(oracle.w_hz, z) + oracle.b);
    anchors.push_back(p);
  }
  return anchors;
}

std::vector<Array> generate_anchors(const OracleParams& oracle,
                                    const Array& baseline, const Array& x,
                                    std::size_t K) {
  oracle.validate();
  Tape tape;
  OracleVars vars = OracleVars::bind(tape, oracle);
  std::vector<Array> out;
  for (Var a : generate_anchors(vars, baseline, x, K)) {
    out.push_back(as_point(a.value(), oracle.T, oracle.d));
  }
  return out;
}

std::vector<Array> chord_anchors(const Array& baseline, const Array& x,
                                 std::size_t K) {
  require(K >= 1, "chord needs K >= 1 anchors");
  require(baseline.shape() == x.shape(), "baseline and input shapes differ");
  std::vector<Array> out;
  for (std::size_t i = 1; i <= K; ++i) {
    const double s = double(i) / double(K + 1);
    out.push_back(add(baseline, scale(sub(x, baseline), s)));
  }
  return out;
}

IntegrationPath expand_points(const std::vector<Array>& anchors,
                              const Array& baseline, const Array& x,
                              std::size_t M) {
  const std::size_t K = anchors.size();
  require(K >= 1, "expand_points needs at least one anchor");
  require(M >= K + 2, "M = " + std::to_string(M) + " is below K + 2 = " +
                          std::to_string(K + 2));
  require(baseline.shape() == x.shape(), "baseline and input shapes differ");
  std::vector<const Array*> vertices = {&baseline};
  for (const Array& a : anchors) {
    require(a.shape() == x.shape(), "anchor shape differs from the input");
    require(a.all_finite(), "anchor contains non-finite entries");
    vertices.push_back(&a);
  }
  vertices.push_back(&x);

  const std::size_t segments = K + 1, extra = M - K - 2;
  std::vector<double> length(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    length[s] = std::sqrt(squared_distance(*vertices[s], *vertices[s + 1]));
  }
  const double total = std::accumulate(length.begin(), length.end(), 0.0);
  std::vector<std::size_t> count(segments, 0);
  std::vector<double> remainder(segments, 0.0);
  std::size_t given = 0;
  for (std::size_t s = 0; s < segments; ++s) {
    const double quota = total > 0.0 ? extra * length[s] / total
                                     : double(extra) / double(segments);
    count[s] = static_cast<std::size_t>(std::floor(quota));
    remainder[s] = quota - double(count[s]);
    given += count[s];
  }
  std::vector<std::size_t> order(segments);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t i = 0; given < extra; ++i, ++given) ++count[order[i % segments]];

  IntegrationPath path;
  path.provenance = PathProvenance::kOracle;
  path.points.reserve(M);
  for (std::size_t s = 0; s < segments; ++s) {
    const Array& a = *vertices[s];
    const Array step = sub(*vertices[s + 1], a);
    path.points.push_back(a);
    for (std::size_t j = 1; j <= count[s]; ++j) {
      path.points.push_back(add(a, scale(step, double(j) / double(count[s] + 1))));
    }
  }
  path.points.push_back(x);
  return path;
}

double path_loss(const std::vector<Array>& anchors, const Array& baseline,
                 const Array& x) {
  require(!anchors.empty(), "path loss needs at least one anchor");
  double s = squared_distance(baseline, anchors.front()) +
             squared_distance(x, anchors.back());
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
    s += squared_distance(anchors[i], anchors[i + 1]);
  }
  return s / double(anchors.size() + 1);
}

Var path_loss(const std::vector<Var>& anchors, const Array& baseline,
              const Array& x) {
  require(!anchors.empty(), "path loss needs at least one anchor");
  Tape& tape = *anchors.front().tape();
  Var s = sum(square(tape.constant(as_column(baseline)) - anchors.front())) +
          sum(square(tape.constant(as_column(x)) - anchors.back()));
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
    s = s + sum(square(anchors[i + 1] - anchors[i]));
  }
  return scale(s, 1.0 / double(anchors.size() + 1));
}

double ValidityAssessor::score(const Array& point) const {
  return std::exp(log_score(point));
}

GaussianAssessor::GaussianAssessor(std::vector<double> mean,
                                   std::vector<double> scale, double offset,
                                   double floor)
    : mean_(std::move(mean)), scale_(std::move(scale)), offset_(offset),
      floor_(floor) {
  require(!mean_.empty() && mean_.size() == scale_.size(),
          "assessor mean and scale must be nonempty and equal length");
  for (std::size_t k = 0; k < mean_.size(); ++k) {
    require(std::isfinite(mean_[k]) && std::isfinite(scale_[k]) &&
                scale_[k] >= kScaleFloor,
            "assessor statistics must be finite with scale >= 1e-6");
  }
  require(std::isfinite(offset_), "assessor offset must be finite");
  require(floor_ > 0.0 && floor_ < 1.0, "assessor floor must lie in (0, 1)");
}

GaussianAssessor GaussianAssessor::fit(const std::vector<TimeSeries>& dataset,
                                       double floor) {
  require(!dataset.empty(), "assessor needs a nonempty training set");
  const std::size_t d = dataset.front().features();
  std::vector<double> mean(d, 0.0), m2(d, 0.0);
  std::size_t n = 0;
  // Welford, pooled over series and time steps.
  for (const TimeSeries& s : dataset) {
    require(s.features() == d, "dataset series disagree on feature count");
    for (std::size_t t = 0; t < s.length(); ++t) {
      ++n;
      for (std::size_t k = 0; k < d; ++k) {
        const double x = s.values()(t, k);
        const double delta = x - mean[k];
        mean[k] += delta / double(n);
        m2[k] += delta * (x - mean[k]);
      }
    }
  }
  std::vector<double> scale(d);
  for (std::size_t k = 0; k < d; ++k) {
    scale[k] = std::max(kScaleFloor, n > 1 ? std::sqrt(m2[k] / double(n - 1)) : 0.0);
  }
  GaussianAssessor a(mean, scale, 0.0, floor);
  std::vector<double> raws;
  raws.reserve(dataset.size());
  for (const TimeSeries& s : dataset) raws.push_back(a.raw(s.values()));
  std::sort(raws.begin(), raws.end());
  const std::size_t m = raws.size();
  const double median = m % 2 ? raws[m / 2] : 0.5 * (raws[m / 2 - 1] + raws[m / 2]);
  a.offset_ = std::log(kAssessorMedian) - median;
  return a;
}

double GaussianAssessor::raw(const Array& point) const {
  require(fitted(), "assessor is not fitted");
  const std::size_t d = mean_.size();
  require(point.size() % d == 0 && point.size() > 0,
          "point size is not a multiple of the assessor feature count");
  double s = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double z = (point[i] - mean_[i % d]) / scale_[i % d];
    s += z * z;
  }
  return -0.5 * s / double(point.size());
}

double GaussianAssessor::log_score(const Array& point) const {
  const double v = raw(point) + offset_;
  return std::clamp(v, std::log(floor_), 0.0);
}

Var GaussianAssessor::log_score(Var point) const {
  require(fitted(), "assessor is not fitted");
  const std::size_t d = mean_.size(), P = point.value().size();
  require(P % d == 0 && P > 0,
          "point size is not a multiple of the assessor feature count");
  Tape& tape = *point.tape();
  Array mu(Shape{P, 1}), inv(Shape{P, 1});
  for (std::size_t i = 0; i < P; ++i) {
    mu[i] = mean_[i % d];
    inv[i] = 1.0 / scale_[i % d];
  }
  Var z = (point - tape.constant(std::move(mu))) * tape.constant(std::move(inv));
  Var v = ndiff::scale(sum(square(z)), -0.5 / double(P)) + offset_;
  // clamp(v, log floor, 0) as two ramps; the gradient vanishes outside.
  const double lo = std::log(floor_);
  Var capped = v - relu(v);
  return relu(capped - lo) + lo;
}

std::string GaussianAssessor::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["role"] = "assessor";
  j["kind"] = "diagonal_gaussian";
  j["mean"] = mean_;
  j["scale"] = scale_;
  j["offset"] = offset_;
  j["floor"] = floor_;
  return j.dump(2);
}

GaussianAssessor GaussianAssessor::from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    require(j.value("role", std::string()) == "assessor",
            "file is not an assessor checkpoint");
    return GaussianAssessor(j.at("mean").get<std::vector<double>>(),
                            j.at("scale").get<std::vector<double>>(),
                            j.at("offset").get<double>(),
                            j.value("floor", kAssessorFloor));
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("malformed assessor JSON: ") + e.what());
  }
}

double validity_loss(const std::vector<Array>& anchors,
                     const ValidityAssessor& assessor) {
  require(!anchors.empty(), "validity loss needs at least one anchor");
  double s = 0.0;
  for (const Array& a : anchors) s += assessor.log_score(a);
  return -s / double(anchors.size());
}

Var validity_loss(const std::vector<Var>& anchors,
                  const ValidityAssessor& assessor) {
  require(!anchors.empty(), "validity loss needs at least one anchor");
  Var s = assessor.log_score(anchors.front());
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    s = s + assessor.log_score(anchors[i]);
  }
  return scale(s, -1.0 / double(anchors.size()));
}

OracleTraining train_oracle(OracleParams oracle, const ValidityAssessor& assessor,
                            const std::vector<std::pair<Array, Array>>& pairs,
                            const OracleConfig& config) {
  oracle.validate();
  require(!pairs.empty(), "oracle training needs at least one pair");
  require(config.K >= 1 && config.batch >= 1, "oracle needs K >= 1 and batch >= 1");
  require(config.eta > 0.0 && std::isfinite(config.eta), "oracle eta must be positive");
  const std::size_t n = oracle.parameter_count();
  const double eps = config.eps_term > 0.0 ? config.eps_term : default_eps_term(n);

  struct Part {
    double lp = 0.0, lv = 0.0;
    std::vector<double> g1, g2;
  };

  OracleTraining out;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t m = std::min(config.batch, order.size() - start);
      std::vector<Part> parts(m);
      parallel_for(m, [&](std::size_t i) {
        const auto& [base, x] = pairs[order[start + i]];
        Tape tape;
        OracleVars vars = OracleVars::bind(tape, oracle);
        std::vector<Var> anchors = generate_anchors(vars, base, x, config.K);
        Var lp = path_loss(anchors, base, x);
        Var lv = validity_loss(anchors, assessor);
        parts[i].lp = lp.item();
        parts[i].lv = lv.item();
        parts[i].g1 = flatten_blocks(tape.gradient_values(lp, vars.all()));
        parts[i].g2 = flatten_blocks(tape.gradient_values(lv, vars.all()));
      });
      std::vector<double> g1(n, 0.0), g2(n, 0.0);
      OracleHistoryRow row;
      row.step = step;
      for (const Part& p : parts) {
        row.path_loss += p.lp / double(m);
        row.validity_loss += p.lv / double(m);
        for (std::size_t k = 0; k < n; ++k) {
          g1[k] += p.g1[k] / double(m);
          g2[k] += p.g2[k] / double(m);
        }
      }
      GradientPair pair(std::move(g1), std::move(g2));
      row.which = classify_case(pair, eps);
      std::vector<double> direction;
      if (row.which == ProjectionCase::kG1Negligible) {
        direction = pair.g2();
      } else if (row.which == ProjectionCase::kG2Negligible) {
        direction = pair.g1();
      } else if (row.which != ProjectionCase::kMaxConflict) {
        row.lambda = lambda_at(config.schedule, step, pair).lambda;
        ProjectionResult r = project(pair, row.lambda, eps);
        row.dot_g1 = r.dot_g1;
        row.dot_g2 = r.dot_g2;
        direction = std::move(r.direction);
      }
      if (!direction.empty()) {
        if (row.which != ProjectionCase::kAligned &&
            row.which != ProjectionCase::kConflicting) {
          row.dot_g1 = dot(direction, pair.g1());
          row.dot_g2 = dot(direction, pair.g2());
        }
        std::vector<double> theta = oracle.flatten();
        for (std::size_t k = 0; k < n; ++k) theta[k] -= config.eta * direction[k];
        for (double t : theta) {
          if (!std::isfinite(t)) {
            throw NumericalError("oracle training diverged at step " +
                                 std::to_string(step));
          }
        }
        oracle.assign(theta);
      }
      out.history.push_back(row);
      ++step;
    }
  }
  out.oracle = std::move(oracle);
  return out;
}

void write_oracle_history(std::ostream& out,
                          const std::vector<OracleHistoryRow>& history) {
  out << "step,path_loss,validity_loss,case,lambda,dot_g1,dot_g2\n";
  for (const OracleHistoryRow& r : history) {
    out << r.step << ',' << fmt17(r.path_loss) << ',' << fmt17(r.validity_loss)
        << ',' << case_name(r.which) << ',' << fmt17(r.lambda) << ','
        << fmt17(r.dot_g1) << ',' << fmt17(r.dot_g2) << '\n';
  }
}

}  // namespace igbo
