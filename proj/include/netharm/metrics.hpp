#pragma once

// Aggregators, level harms and network harm, plus the classic
// Alpha-Centrality / personalized PageRank solvers that network harm
// generalizes.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netharm/graph.hpp"
#include "netharm/paths.hpp"

namespace netharm {

class Aggregator {
 public:
  enum class Kind { Max, Avg, TopK, Sum };

  static Aggregator max() { return Aggregator(Kind::Max, 0.0); }
  static Aggregator avg() { return Aggregator(Kind::Avg, 0.0); }
  static Aggregator sum() { return Aggregator(Kind::Sum, 0.0); }
  // k is a percentage in (0, 100]; throws InvalidAggregator otherwise.
  static Aggregator top_k(double k_percent);

  // Accepts "max", "avg", "sum", "top-<k>" (also "top<k>").
  static std::optional<Aggregator> parse(std::string_view text);

  Kind kind() const noexcept { return kind_; }
  double k_percent() const noexcept { return k_; }
  // Max, Avg and TopK keep results inside the range of their inputs.
  bool is_bounded() const noexcept { return kind_ != Kind::Sum; }
  std::string name() const;

  friend bool operator==(const Aggregator&, const Aggregator&) = default;

 private:
  Aggregator(Kind kind, double k) : kind_(kind), k_(k) {}

  Kind kind_;
  double k_;
};

struct WeightedValue {
  double value = 0.0;
  double weight = 1.0;  // multiplicity
};

// TopK: sort the multiplicity-expanded values in descending order, take the
// element at 1-based position ceil(k/100 * N) as threshold and average every
// value >= threshold. Throws EmptyMultiset.
double aggregate(const Aggregator& agg, std::span<const WeightedValue> values);

struct HarmConfig {
  Aggregator inner = Aggregator::avg();
  Aggregator outer = Aggregator::max();
  double alpha = 0.85;
  // nullopt = unbounded: the natural depth for simple and shortest schemes
  // (n - 1), and for AllPaths only the convergent Sum/Sum regime.
  std::optional<int> m_max;
  PathScheme scheme = PathScheme::AllShortestPaths;
  Direction direction = Direction::Upstream;

  friend bool operator==(const HarmConfig&, const HarmConfig&) = default;
};

// Throws AlphaOutOfRange, InvalidMMax.
void validate(const HarmConfig& cfg);

// Depth actually used for `cfg` on `g`. Throws InvalidMMax (unbounded
// AllPaths outside Sum/Sum) and DivergentConfig (unbounded Sum/Sum/AllPaths
// with alpha >= 1 / lambda_max).
int resolve_m_max(const HarmGraph& g, const HarmConfig& cfg);

struct LevelHarm {
  int level = 0;
  PathCount size = 0;           // paths counted at this level
  std::size_t distinct = 0;     // distinct origin nodes
  std::optional<double> value;  // absent for empty levels
};

std::vector<LevelHarm> level_harms(const LevelDecomposition& dec, std::span<const double> harms,
                                   const Aggregator& inner);
std::vector<LevelHarm> level_harms(const LevelDecomposition& dec, const HarmGraph& g,
                                   const Aggregator& inner);

// Outer aggregation over the damped level values alpha^(m-1) x^m. Empty
// levels are skipped everywhere (including the Avg denominator); with no
// non-empty level the result is 0.
double combine_levels(const Aggregator& outer, double alpha, std::span<const LevelHarm> levels);

struct LevelBreakdown {
  int level = 0;
  PathCount size = 0;
  std::size_t distinct = 0;
  std::optional<double> value;
  std::optional<double> weighted;
};

struct HarmBreakdown {
  NodeId target;
  double harm = 0.0;
  int m_max = 0;
  std::vector<LevelBreakdown> levels;
};

HarmBreakdown evaluate_network_harm(const HarmGraph& g, NodeId target, const HarmConfig& cfg,
                                    const DecomposeOptions& options = {});
double network_harm(const HarmGraph& g, NodeId target, const HarmConfig& cfg,
                    const DecomposeOptions& options = {});

using CentralityVector = std::vector<double>;

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 100'000;
  // Below this size a dense LU solve is used when iteration stalls.
  std::size_t dense_fallback_below = 2'000;
};

// x = alpha A x + (1 - alpha) beta, A(i, j) = 1 iff edge j -> i.
// Throws AlphaTooLarge (alpha >= 1 / lambda_max), NoConvergence.
CentralityVector alpha_centrality(const HarmGraph& g, double alpha, std::span<const double> beta,
                                  const SolverOptions& options = {});

// x = alpha P x + (1 - alpha) beta, P(i, j) = A(i, j) / outdeg(j). Columns
// of nodes without customers stay zero (no teleport). Throws
// AlphaOutOfRange, NoConvergence.
CentralityVector pagerank_personalized(const HarmGraph& g, double alpha, std::span<const double> beta,
                                       const SolverOptions& options = {});

struct ReductionReport {
  double alpha = 0.0;
  int m_max = 0;
  double tolerance = 1e-6;
  std::vector<double> network_sum;  // H_{Sum,Sum}(a; AllPaths) per node
  std::vector<double> closed_form;  // Neumann-series value per node
  double max_deviation = 0.0;
  bool passed = false;
};

// Checks H_{Sum,Sum}(a; AllPaths) against (1/alpha) [ (M h)_a - M_aa h(a) ]
// with M = (I - alpha A)^-1. The M_aa term removes walks that start at the
// target itself; when no cycle passes through a it is exactly h(a).
// Throws AlphaTooLarge, InsufficientDepth ((alpha lambda)^m_max >= 1e-10).
ReductionReport verify_reduction(const HarmGraph& g, double alpha, int m_max, double tolerance = 1e-6);

// Smallest depth with (alpha lambda)^m below `residual`; 1 for acyclic graphs.
int reduction_depth(const HarmGraph& g, double alpha, double residual = 1e-12);

// w_h h + sum_i w_i H_i, for callers that blend several network scores.
double linear_combination(double intrinsic, double intrinsic_weight,
                          std::span<const std::pair<double, double>> weighted_scores);

}  // namespace netharm
