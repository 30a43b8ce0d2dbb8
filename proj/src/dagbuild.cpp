#include "igbo/dagbuild.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <random>
#include <set>

#include "igbo/errors.hpp"
#include "igbo/format.hpp"
#include "json.hpp"

namespace igbo {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile needs p in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sample_mean(const std::vector<double>& xs) {
  require(!xs.empty(), "mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
  require(xs.size() >= 2, "sample variance needs at least two values");
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

namespace {

std::vector<double> column(const Array& a, std::size_t k) {
  std::vector<double> out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) out[r] = a(r, k);
  return out;
}

std::vector<double> batch_differences(const ScoreBatches& b, std::size_t u,
                                      std::size_t v) {
  std::vector<double> d(b.batches());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = b.means(i, u) - b.means(i, v);
  return d;
}

void check_feature(const ScoreBatches& b, std::size_t k) {
  require(k < b.features(), "feature index " + std::to_string(k) +
                                " out of range (d = " +
                                std::to_string(b.features()) + ")");
}

}  // namespace

double ScoreBatches::within_variance(std::size_t batch, std::size_t k) const {
  require(has_samples(), "within-batch variance needs retained samples");
  return sample_variance(column(samples.at(batch), k));
}

double ScoreBatches::grand_mean(std::size_t k) const {
  return sample_mean(column(means, k));
}

ScoreBatches batch_stats(const std::vector<Array>& batches, bool retain_samples) {
  require(!batches.empty(), "batch_stats needs at least one batch");
  const std::size_t n = batches.front().rows();
  const std::size_t d = batches.front().cols();
  require(n >= 2, "each batch needs n >= 2 samples");
  ScoreBatches out;
  out.batch_size = n;
  out.means = Array(Shape{batches.size(), d});
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const Array& b = batches[i];
    require(b.shape().rank() == 2 && b.rows() == n && b.cols() == d,
            "all batches must share the same n x d shape");
    require(b.all_finite(), "scores must be finite");
    for (std::size_t k = 0; k < d; ++k) out.means(i, k) = sample_mean(column(b, k));
  }
  if (retain_samples) out.samples = batches;
  return out;
}

const char* variance_mode_name(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::kAuto: return "auto";
    case VarianceMode::kBetweenBatch: return "between-batch";
    case VarianceMode::kWithinBatch: return "within-batch";
  }
  return "?";
}

VarianceMode parse_variance_mode(const std::string& name) {
  for (VarianceMode m : {VarianceMode::kAuto, VarianceMode::kBetweenBatch,
                         VarianceMode::kWithinBatch}) {
    if (name == variance_mode_name(m)) return m;
  }
  throw ContractViolation("unknown variance mode '" + name + "'");
}

VarianceMode resolve_variance_mode(VarianceMode mode, std::size_t batches) {
  if (mode != VarianceMode::kAuto) return mode;
  return batches >= 8 ? VarianceMode::kBetweenBatch : VarianceMode::kWithinBatch;
}

EdgeStat edge_probability(const ScoreBatches& b, std::size_t u, std::size_t v,
                          VarianceMode mode) {
  check_feature(b, u);
  check_feature(b, v);
  EdgeStat s;
  s.u = u;
  s.v = v;
  s.source = resolve_variance_mode(mode, b.batches());
  const std::vector<double> diffs = batch_differences(b, u, v);
  s.mean_diff = sample_mean(diffs);
  double var = 0.0;
  if (s.source == VarianceMode::kBetweenBatch) {
    require(b.batches() >= 2, "between-batch variance needs N >= 2 batches");
    var = sample_variance(diffs);
  } else {
    require(b.has_samples(), "within-batch variance needs retained samples");
    for (const Array& batch : b.samples) {
      std::vector<double> per_sample(batch.rows());
      for (std::size_t r = 0; r < batch.rows(); ++r) {
        per_sample[r] = batch(r, u) - batch(r, v);
      }
      var += sample_variance(per_sample);
    }
    var /= static_cast<double>(b.samples.size()) * static_cast<double>(b.batch_size);
  }
  s.sigma = std::sqrt(var);
  if (!(s.sigma > 0.0)) {
    throw DegenerateStatistic("degenerate statistic: zero spread for pair (" +
                              std::to_string(u) + ", " + std::to_string(v) + ")");
  }
  s.probability = normal_cdf(s.mean_diff / s.sigma);
  return s;
}

double bootstrap_probability(const ScoreBatches& b, std::size_t u, std::size_t v,
                             std::size_t resamples, std::uint64_t seed) {
  require(resamples >= 100, "bootstrap needs R >= 100 resamples");
  require(b.batches() >= 2, "bootstrap needs N >= 2 batches");
  check_feature(b, u);
  check_feature(b, v);
  const std::vector<double> diffs = batch_differences(b, u, v);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, diffs.size() - 1);
  std::size_t positive = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) s += diffs[pick(rng)];
    if (s > 0.0) ++positive;
  }
  return static_cast<double>(positive) / static_cast<double>(resamples);
}

AcyclicityResult verify_acyclic(std::size_t nodes, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> out(nodes);
  std::vector<std::size_t> indegree(nodes, 0);
  for (const auto& [a, b] : edges) {
    require(a < nodes && b < nodes, "edge references an unknown node");
    out[a].push_back(b);
    ++indegree[b];
  }
  for (auto& adj : out) std::sort(adj.begin(), adj.end());

  AcyclicityResult result;
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  std::vector<std::size_t> remaining = indegree;
  for (std::size_t i = 0; i < nodes; ++i) {
    if (remaining[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const std::size_t n = ready.top();
    ready.pop();
    result.order.push_back(n);
    for (std::size_t m : out[n]) {
      if (--remaining[m] == 0) ready.push(m);
    }
  }
  if (result.order.size() == nodes) return result;

  // Every leftover node lies on or leads into a cycle; walk to find one.
  result.acyclic = false;
  result.order.clear();
  enum : char { kWhite, kGrey, kBlack };
  std::vector<char> colour(nodes, kWhite);
  std::vector<std::size_t> stack;
  std::function<bool(std::size_t)> visit = [&](std::size_t n) {
    colour[n] = kGrey;
    stack.push_back(n);
    for (std::size_t m : out[n]) {
      if (colour[m] == kGrey) {
        auto start = std::find(stack.begin(), stack.end(), m);
        result.cycle.assign(start, stack.end());
        result.cycle.push_back(m);
        return true;
      }
      if (colour[m] == kWhite && visit(m)) return true;
    }
    colour[n] = kBlack;
    stack.pop_back();
    return false;
  };
  for (std::size_t i = 0; i < nodes; ++i) {
    if (remaining[i] > 0 && colour[i] == kWhite && visit(i)) break;
  }
  return result;
}

Orientation orient_edges(const ScoreBatches& b, double alpha,
                         const OrientOptions& options) {
  require(alpha >= 0.5 && alpha < 1.0, "alpha must lie in [0.5, 1)");
  const std::size_t d = b.features();
  Orientation o;
  for (std::size_t u = 0; u < d; ++u) {
    for (std::size_t v = u + 1; v < d; ++v) {
      EdgeStat s;
      try {
        s = edge_probability(b, u, v, options.mode);
      } catch (const DegenerateStatistic&) {
        s.u = u;
        s.v = v;
        s.mean_diff = sample_mean(batch_differences(b, u, v));
        s.sigma = 0.0;
        s.source = resolve_variance_mode(options.mode, b.batches());
        s.bootstrap = true;
        if (s.mean_diff == 0.0 || b.batches() < 2) {
          s.probability = s.mean_diff > 0.0 ? 1.0 : s.mean_diff < 0.0 ? 0.0 : 0.5;
        } else {
          s.probability = bootstrap_probability(b, u, v, options.bootstrap_resamples,
                                                options.seed);
        }
      }
      std::string decision = "none";
      if (s.mean_diff != 0.0) {
        if (s.probability > alpha) {
          o.edges.emplace_back(u, v);
          decision = std::to_string(u) + "->" + std::to_string(v);
        } else if (1.0 - s.probability > alpha) {
          o.edges.emplace_back(v, u);
          decision = std::to_string(v) + "->" + std::to_string(u);
        }
      }
      o.stats.push_back(s);
      o.decisions.push_back(decision);
    }
  }
  const AcyclicityResult check = verify_acyclic(d, o.edges);
  if (!check.acyclic) {
    std::string walk;
    for (std::size_t n : check.cycle) walk += (walk.empty() ? "" : " -> ") + std::to_string(n);
    throw CycleDetected("orientation produced a cycle: " + walk, check.cycle);
  }
  return o;
}

std::vector<MarginViolation> transitivity_check(const ScoreBatches& b, double alpha,
                                                const std::vector<Edge>& edges,
                                                VarianceMode mode) {
  require(alpha >= 0.5 && alpha < 1.0, "alpha must lie in [0.5, 1)");
  const double z = alpha == 0.5 ? 0.0 : normal_quantile(alpha);
  std::vector<MarginViolation> out;
  for (const auto& [u, v] : edges) {
    double margin = 0.0, sigma = 0.0;
    try {
      const EdgeStat s = edge_probability(b, u, v, mode);
      margin = s.mean_diff;
      sigma = s.sigma;
    } catch (const DegenerateStatistic&) {
      margin = sample_mean(batch_differences(b, u, v));
    }
    if (!(margin >= z * sigma) || margin <= 0.0) {
      out.push_back({u, v, margin, z * sigma});
    }
  }
  return out;
}

std::vector<Edge> InterpretabilityDag::pairs() const {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const DagEdge& e : edges) out.emplace_back(e.src, e.dst);
  return out;
}

void InterpretabilityDag::validate() const {
  require(!nodes.empty(), "DAG has no nodes");
  std::set<Edge> seen;
  for (const DagEdge& e : edges) {
    require(e.src < nodes.size() && e.dst < nodes.size(),
            "DAG edge references an unknown feature");
    require(e.src != e.dst, "DAG edge is a self loop");
    require(seen.insert({e.src, e.dst}).second, "duplicate DAG edge");
    require(std::isfinite(e.eps) && std::isfinite(e.delta),
            "DAG interval bounds must be finite");
    require(e.eps > 0.0 && e.eps <= e.delta,
            "DAG interval must satisfy 0 < eps <= delta");
  }
  const AcyclicityResult check = verify_acyclic(nodes.size(), pairs());
  if (!check.acyclic) {
    std::string walk;
    for (std::size_t n : check.cycle) walk += (walk.empty() ? "" : " -> ") + nodes[n];
    throw ContractViolation("DAG contains a cycle: " + walk);
  }
}

std::string InterpretabilityDag::to_json() const {
  nlohmann::ordered_json j;
  j["nodes"] = nodes;
  j["edges"] = nlohmann::ordered_json::array();
  for (const DagEdge& e : edges) {
    nlohmann::ordered_json je;
    je["src"] = e.src;
    je["dst"] = e.dst;
    je["eps"] = e.eps;
    je["delta"] = e.delta;
    j["edges"].push_back(je);
  }
  j["alpha"] = alpha;
  j["provenance"] = provenance;
  return j.dump(2) + "\n";
}

InterpretabilityDag InterpretabilityDag::from_json(const std::string& text) {
  InterpretabilityDag dag;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    dag.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& je : j.at("edges")) {
      // Endpoints may be given by index or by node name.
      auto endpoint = [&](const nlohmann::json& x) -> std::size_t {
        if (x.is_string()) {
          auto it = std::find(dag.nodes.begin(), dag.nodes.end(), x.get<std::string>());
          require(it != dag.nodes.end(),
                  "DAG edge references unknown feature '" + x.get<std::string>() + "'");
          return static_cast<std::size_t>(it - dag.nodes.begin());
        }
        return x.get<std::size_t>();
      };
      dag.edges.push_back({endpoint(je.at("src")), endpoint(je.at("dst")),
                           je.at("eps").get<double>(), je.at("delta").get<double>()});
    }
    dag.alpha = j.value("alpha", 0.5);
    dag.provenance = j.value("provenance", std::string("user"));
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("malformed DAG file: ") + e.what());
  }
  dag.validate();
  return dag;
}

DagBuild build_dag(const ScoreBatches& b, double alpha, const IntervalRule& rule,
                   const std::vector<std::string>& names,
                   const OrientOptions& options) {
  require(names.size() == b.features(), "one name per feature is required");
  require(rule.eps_min > 0.0, "eps_min must be positive");
  DagBuild out;
  out.orientation = orient_edges(b, alpha, options);
  const double z = alpha == 0.5 ? 0.0 : normal_quantile(alpha);
  out.dag.nodes = names;
  out.dag.alpha = alpha;
  out.dag.provenance = "clt";
  for (const auto& [u, v] : out.orientation.edges) {
    DagEdge e{u, v, 0.0, 0.0};
    if (auto it = rule.user.find({u, v}); it != rule.user.end()) {
      e.eps = it->second.first;
      e.delta = it->second.second;
      require(e.eps > 0.0 && e.eps <= e.delta,
              "user interval must satisfy 0 < eps <= delta");
      out.dag.edges.push_back(e);
      continue;
    }
    const EdgeStat* s = nullptr;
    for (const EdgeStat& st : out.orientation.stats) {
      if ((st.u == u && st.v == v) || (st.u == v && st.v == u)) s = &st;
    }
    const double m = s->u == u ? s->mean_diff : -s->mean_diff;
    e.eps = std::max(rule.eps_min, m - z * s->sigma);
    e.delta = m + z * s->sigma;
    if (e.eps > e.delta) {
      out.dropped.push_back(e);
    } else {
      out.dag.edges.push_back(e);
    }
  }
  out.dag.validate();
  return out;
}

void write_edge_stats(std::ostream& out, const Orientation& o) {
  out << "u,v,mean_diff,sigma,prob,decision\n";
  for (std::size_t i = 0; i < o.stats.size(); ++i) {
    const EdgeStat& s = o.stats[i];
    out << s.u << ',' << s.v << ',' << fmt17(s.mean_diff) << ',' << fmt17(s.sigma)
        << ',' << fmt17(s.probability) << ',' << o.decisions[i] << '\n';
  }
}

std::vector<std::string> default_feature_names(std::size_t d) {
  std::vector<std::string> names(d);
  for (std::size_t k = 0; k < d; ++k) names[k] = "x" + std::to_string(k);
  return names;
}

}  // namespace igbo
