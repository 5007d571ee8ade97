#pragma once

// Counterfactual scoring: harm overrides and node removals applied on top of
// an immutable base graph.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "netharm/graph.hpp"
#include "netharm/metrics.hpp"

namespace netharm {

struct ScenarioOverlay {
  std::map<NodeId, HarmScore> harm_overrides;
  std::set<NodeId> removed_nodes;

  bool empty() const noexcept { return harm_overrides.empty() && removed_nodes.empty(); }
};

// Throws InvalidOverlay when a node is unknown or both overridden and removed.
void validate(const HarmGraph& g, const ScenarioOverlay& overlay);

struct OverlaidGraph {
  HarmGraph graph;
  std::vector<std::optional<NodeId>> id_map;  // base id -> id in `graph`
};

OverlaidGraph apply_overlay(const HarmGraph& g, const ScenarioOverlay& overlay);

// Network harm of `target` on the overlaid graph. Throws InvalidOverlay
// (including a removed target).
double scored_with(const HarmGraph& g, const ScenarioOverlay& overlay, NodeId target,
                   const HarmConfig& cfg);

// H(target; h(b) = 100) - H(target). Throws UnknownNode, SelfQuery.
double vulnerability(const HarmGraph& g, NodeId target, NodeId b, const HarmConfig& cfg);

// H(target; G - b) - H(target; G). Negative means b's presence worsens the
// target's score. Throws UnknownNode, SelfQuery.
double influence(const HarmGraph& g, NodeId target, NodeId b, const HarmConfig& cfg);

// Sum over n != b of influence(n, b). Throws UnknownNode.
double global_influence(const HarmGraph& g, NodeId b, const HarmConfig& cfg);

// Network harm of every node, in id order.
std::vector<double> network_harm_all(const HarmGraph& g, const HarmConfig& cfg, unsigned threads = 0);

// Row-major n x n matrix, entry (target, b) = influence(target, b); the
// diagonal is 0. Evaluates one removal per b across `threads` workers
// (0 = hardware concurrency); output is independent of the thread count.
class InfluenceMatrix {
 public:
  InfluenceMatrix() = default;
  explicit InfluenceMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(NodeId target, NodeId b) const { return values_[target.index * n_ + b.index]; }
  double& operator()(NodeId target, NodeId b) { return values_[target.index * n_ + b.index]; }
  // Column sum for b: its global influence.
  double global_influence(NodeId b) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

InfluenceMatrix influence_matrix(const HarmGraph& g, const HarmConfig& cfg, unsigned threads = 0);

enum class ReportKind { Vulnerability, Influence, GlobalInfluence };

std::string_view to_string(ReportKind kind) noexcept;
std::optional<ReportKind> parse_report_kind(std::string_view text);

struct RankedNode {
  NodeId node;
  std::string label;
  double score = 0.0;
};

struct InfluenceReport {
  std::optional<NodeId> target;  // absent for GlobalInfluence
  ReportKind kind = ReportKind::Vulnerability;
  HarmConfig config;
  std::vector<RankedNode> entries;  // descending |score|, ties by label
};

// Ranks every node other than the target (all nodes for GlobalInfluence).
// top_n = 0 keeps the full ranking.
InfluenceReport rank_report(const HarmGraph& g, std::optional<NodeId> target, ReportKind kind,
                            const HarmConfig& cfg, std::size_t top_n, unsigned threads = 0);

// Sorts in place by descending |score| with ties broken by label.
void sort_ranking(std::vector<RankedNode>& entries);

}  // namespace netharm
