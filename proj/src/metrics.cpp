#include "netharm/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "netharm/errors.hpp"

namespace netharm {

Aggregator Aggregator::top_k(double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    std::ostringstream msg;
    msg << "TOP-k percentage must lie in (0, 100], got " << k_percent;
    throw Error(ErrorCode::InvalidAggregator, msg.str());
  }
  return Aggregator(Kind::TopK, k_percent);
}

std::optional<Aggregator> Aggregator::parse(std::string_view text) {
  if (text == "max") return max();
  if (text == "avg") return avg();
  if (text == "sum") return sum();
  if (text.starts_with("top")) {
    auto rest = text.substr(3);
    if (rest.starts_with('-')) rest.remove_prefix(1);
    double k = 0.0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || !(k > 0.0 && k <= 100.0)) {
      return std::nullopt;
    }
    return top_k(k);
  }
  return std::nullopt;
}

std::string Aggregator::name() const {
  switch (kind_) {
    case Kind::Max: return "max";
    case Kind::Avg: return "avg";
    case Kind::Sum: return "sum";
    case Kind::TopK: {
      std::ostringstream out;
      out << "top-" << k_;
      return out.str();
    }
  }
  return "?";
}

namespace {

double top_k_mean(double k_percent, std::vector<WeightedValue> values, double total_weight) {
  std::sort(values.begin(), values.end(),
            [](const WeightedValue& a, const WeightedValue& b) { return a.value > b.value; });
  // 1-based nearest-rank position; the epsilon keeps exact products such as
  // 50% of 4 from rounding up to the next rank.
  const double exact = k_percent / 100.0 * total_weight;
  const double position = std::max(1.0, std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  double cumulative = 0.0;
  double threshold = values.back().value;
  for (const auto& v : values) {
    cumulative += v.weight;
    if (cumulative >= position) {
      threshold = v.value;
      break;
    }
  }
  double sum = 0.0;
  double weight = 0.0;
  for (const auto& v : values) {
    if (v.value < threshold) break;
    sum += v.value * v.weight;
    weight += v.weight;
  }
  return sum / weight;
}

}  // namespace

double aggregate(const Aggregator& agg, std::span<const WeightedValue> values) {
  std::vector<WeightedValue> present;
  present.reserve(values.size());
  double total_weight = 0.0;
  for (const auto& v : values) {
    if (v.weight > 0.0) {
      present.push_back(v);
      total_weight += v.weight;
    }
  }
  if (present.empty()) throw Error(ErrorCode::EmptyMultiset, "aggregate over an empty multiset");

  switch (agg.kind()) {
    case Aggregator::Kind::Max:
      return std::max_element(present.begin(), present.end(),
                              [](const auto& a, const auto& b) { return a.value < b.value; })
          ->value;
    case Aggregator::Kind::Sum:
    case Aggregator::Kind::Avg: {
      double sum = 0.0;
      for (const auto& v : present) sum += v.value * v.weight;
      return agg.kind() == Aggregator::Kind::Sum ? sum : sum / total_weight;
    }
    case Aggregator::Kind::TopK:
      return top_k_mean(agg.k_percent(), std::move(present), total_weight);
  }
  return 0.0;
}

void validate(const HarmConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1], got " << cfg.alpha;
    throw Error(ErrorCode::AlphaOutOfRange, msg.str());
  }
  if (cfg.m_max && *cfg.m_max < 1) {
    throw Error(ErrorCode::InvalidMMax, "m_max must be >= 1, got " + std::to_string(*cfg.m_max));
  }
}

int reduction_depth(const HarmGraph& g, double alpha, double residual) {
  const auto lambda = spectral_radius_estimate(g).value;
  if (lambda == 0.0) return std::max(1, static_cast<int>(g.node_count()) - 1);
  const double ratio = alpha * lambda;
  if (ratio >= 1.0) {
    throw Error(ErrorCode::AlphaTooLarge, "alpha * lambda_max >= 1, Neumann series diverges");
  }
  return std::max(1, static_cast<int>(std::ceil(std::log(residual) / std::log(ratio))));
}

int resolve_m_max(const HarmGraph& g, const HarmConfig& cfg) {
  if (cfg.m_max) return *cfg.m_max;
  const int natural = std::max(1, static_cast<int>(g.node_count()) - 1);
  if (cfg.scheme != PathScheme::AllPaths) return natural;
  if (cfg.inner.kind() != Aggregator::Kind::Sum || cfg.outer.kind() != Aggregator::Kind::Sum) {
    throw Error(ErrorCode::InvalidMMax, "the all-paths scheme needs a finite m_max");
  }
  if (g.empty()) return 1;
  const auto lambda = spectral_radius_estimate(g).value;
  if (cfg.alpha * lambda >= 1.0) {
    std::ostringstream msg;
    msg << "sum/sum over all paths diverges: alpha " << cfg.alpha << " >= 1/lambda_max = "
        << (lambda > 0 ? 1.0 / lambda : 0.0);
    throw Error(ErrorCode::DivergentConfig, msg.str());
  }
  return reduction_depth(g, cfg.alpha);
}

std::vector<LevelHarm> level_harms(const LevelDecomposition& dec, std::span<const double> harms,
                                   const Aggregator& inner) {
  std::vector<LevelHarm> result;
  result.reserve(dec.levels.size());
  std::vector<WeightedValue> values;
  for (const auto& level : dec.levels) {
    LevelHarm lh{level.level, level.total(), level.entries.size(), std::nullopt};
    if (!level.empty()) {
      values.clear();
      for (const auto& e : level.entries) values.push_back({harms[e.node.index], to_double(e.multiplicity)});
      lh.value = aggregate(inner, values);
    }
    result.push_back(lh);
  }
  return result;
}

std::vector<LevelHarm> level_harms(const LevelDecomposition& dec, const HarmGraph& g,
                                   const Aggregator& inner) {
  return level_harms(dec, g.harms(), inner);
}

double combine_levels(const Aggregator& outer, double alpha, std::span<const LevelHarm> levels) {
  std::vector<WeightedValue> weighted;
  double damping_total = 0.0;
  for (const auto& lh : levels) {
    if (!lh.value) continue;
    const double damping = std::pow(alpha, lh.level - 1);
    weighted.push_back({damping * *lh.value, 1.0});
    damping_total += damping;
  }
  if (weighted.empty()) return 0.0;
  if (outer.kind() == Aggregator::Kind::Avg) {
    double sum = 0.0;
    for (const auto& w : weighted) sum += w.value;
    return sum / damping_total;
  }
  return aggregate(outer, weighted);
}

HarmBreakdown evaluate_network_harm(const HarmGraph& g, NodeId target, const HarmConfig& cfg,
                                    const DecomposeOptions& options) {
  validate(cfg);
  if (!g.contains(target)) {
    throw Error(ErrorCode::UnknownNode, "target id " + std::to_string(target.index) + " not in graph");
  }
  const int m_max = resolve_m_max(g, cfg);
  const auto dec = decompose(g, target, cfg.direction, cfg.scheme, m_max, options);
  const auto levels = level_harms(dec, g, cfg.inner);

  HarmBreakdown out;
  out.target = target;
  out.m_max = m_max;
  out.harm = combine_levels(cfg.outer, cfg.alpha, levels);
  out.levels.reserve(levels.size());
  for (const auto& lh : levels) {
    LevelBreakdown lb{lh.level, lh.size, lh.distinct, lh.value, std::nullopt};
    if (lh.value) lb.weighted = std::pow(cfg.alpha, lh.level - 1) * *lh.value;
    out.levels.push_back(lb);
  }
  return out;
}

double network_harm(const HarmGraph& g, NodeId target, const HarmConfig& cfg,
                    const DecomposeOptions& options) {
  return evaluate_network_harm(g, target, cfg, options).harm;
}

namespace {

void check_beta(const HarmGraph& g, std::span<const double> beta) {
  if (beta.size() != g.node_count()) {
    throw Error(ErrorCode::ConstraintViolation, "beta has " + std::to_string(beta.size()) +
                                                    " entries for a graph of " +
                                                    std::to_string(g.node_count()) + " nodes");
  }
}

// Column weight of supplier j in the iteration matrix.
using ColumnWeight = double (*)(const HarmGraph&, NodeId);

double unit_weight(const HarmGraph&, NodeId) { return 1.0; }

double inverse_out_degree(const HarmGraph& g, NodeId j) {
  return 1.0 / static_cast<double>(g.out_neighbors(j).size());
}

Eigen::MatrixXd iteration_matrix(const HarmGraph& g, ColumnWeight weight) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (auto [u, v] : g.edges()) a(v.index, u.index) = weight(g, u);
  return a;
}

CentralityVector solve_fixed_point(const HarmGraph& g, double alpha, std::span<const double> beta,
                                   ColumnWeight weight, const SolverOptions& options) {
  const std::size_t n = g.node_count();
  CentralityVector x(beta.begin(), beta.end());
  CentralityVector next(n);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double delta = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
      double network = 0.0;
      for (NodeId j : g.in_neighbors(NodeId{i})) network += weight(g, j) * x[j.index];
      next[i] = alpha * network + (1.0 - alpha) * beta[i];
      delta = std::max(delta, std::abs(next[i] - x[i]));
    }
    std::swap(x, next);
    if (delta <= options.tolerance) return x;
  }
  if (n >= options.dense_fallback_below) {
    throw Error(ErrorCode::NoConvergence, "fixed-point iteration did not converge in " +
                                              std::to_string(options.max_iterations) + " iterations");
  }
  const auto a = iteration_matrix(g, weight);
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(size, size) - alpha * a;
  Eigen::VectorXd rhs(size);
  for (Eigen::Index i = 0; i < size; ++i) rhs(i) = (1.0 - alpha) * beta[static_cast<std::size_t>(i)];
  Eigen::VectorXd solution = system.partialPivLu().solve(rhs);
  return CentralityVector(solution.data(), solution.data() + size);
}

}  // namespace

CentralityVector alpha_centrality(const HarmGraph& g, double alpha, std::span<const double> beta,
                                  const SolverOptions& options) {
  check_beta(g, beta);
  if (g.empty()) return {};
  if (alpha < 0.0) throw Error(ErrorCode::AlphaOutOfRange, "alpha must be non-negative");
  const auto lambda = spectral_radius_estimate(g).value;
  if (alpha * lambda >= 1.0) {
    std::ostringstream msg;
    msg << "alpha " << alpha << " >= 1/lambda_max (lambda_max = " << lambda << ")";
    throw Error(ErrorCode::AlphaTooLarge, msg.str());
  }
  return solve_fixed_point(g, alpha, beta, unit_weight, options);
}

CentralityVector pagerank_personalized(const HarmGraph& g, double alpha, std::span<const double> beta,
                                       const SolverOptions& options) {
  check_beta(g, beta);
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    std::ostringstream msg;
    msg << "PageRank alpha must lie in [0, 1), got " << alpha;
    throw Error(ErrorCode::AlphaOutOfRange, msg.str());
  }
  return solve_fixed_point(g, alpha, beta, inverse_out_degree, options);
}

ReductionReport verify_reduction(const HarmGraph& g, double alpha, int m_max, double tolerance) {
  if (g.empty()) throw Error(ErrorCode::EmptyGraph, "reduction check on an empty graph");
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1], got " << alpha;
    throw Error(ErrorCode::AlphaOutOfRange, msg.str());
  }
  const auto lambda = spectral_radius_estimate(g).value;
  if (alpha * lambda >= 1.0) {
    std::ostringstream msg;
    msg << "alpha " << alpha << " >= 1/lambda_max (lambda_max = " << lambda << ")";
    throw Error(ErrorCode::AlphaTooLarge, msg.str());
  }
  if (lambda > 0.0 && std::pow(alpha * lambda, m_max) >= 1e-10) {
    throw Error(ErrorCode::InsufficientDepth,
                "m_max " + std::to_string(m_max) + " too shallow: (alpha lambda)^m_max >= 1e-10");
  }

  ReductionReport report;
  report.alpha = alpha;
  report.m_max = m_max;
  report.tolerance = tolerance;

  HarmConfig cfg{Aggregator::sum(), Aggregator::sum(), alpha, m_max, PathScheme::AllPaths,
                 Direction::Upstream};
  const std::size_t n = g.node_count();
  const auto size = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(size, size) - alpha * iteration_matrix(g, unit_weight);
  const Eigen::MatrixXd resolvent = system.partialPivLu().inverse();
  const Eigen::Map<const Eigen::VectorXd> h(g.harms().data(), size);
  const Eigen::VectorXd propagated = resolvent * h;

  report.network_sum.resize(n);
  report.closed_form.resize(n);
  for (std::uint32_t a = 0; a < n; ++a) {
    report.network_sum[a] = network_harm(g, NodeId{a}, cfg);
    report.closed_form[a] = (propagated(a) - resolvent(a, a) * h(a)) / alpha;
    report.max_deviation =
        std::max(report.max_deviation, std::abs(report.network_sum[a] - report.closed_form[a]));
  }
  report.passed = report.max_deviation < tolerance;
  return report;
}

double linear_combination(double intrinsic, double intrinsic_weight,
                          std::span<const std::pair<double, double>> weighted_scores) {
  return std::accumulate(weighted_scores.begin(), weighted_scores.end(), intrinsic_weight * intrinsic,
                         [](double acc, const auto& ws) { return acc + ws.first * ws.second; });
}

}  // namespace netharm
