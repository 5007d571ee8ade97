#pragma once

// Node-valued directed supply graph.
//
// An edge (u, v) means "u supplies v". Nodes carry a harm score in [0, 100]
// where 0 is a perfect ESG rating and 100 the worst. Ids are dense and
// assigned in input order, so every downstream computation is reproducible.
//
// Matrix convention used by the centrality solvers: entry (i, j) of the
// adjacency matrix is 1 iff there is an edge j -> i, i.e. row i lists the
// suppliers of i.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace netharm {

struct NodeId {
  std::uint32_t index = 0;

  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

class HarmScore {
 public:
  static constexpr double kMin = 0.0;
  static constexpr double kMax = 100.0;

  constexpr HarmScore() = default;
  // Throws HarmOutOfRange unless 0 <= value <= 100.
  explicit HarmScore(double value);

  constexpr double value() const noexcept { return value_; }

  friend constexpr auto operator<=>(HarmScore, HarmScore) = default;

 private:
  double value_ = 0.0;
};

enum class Direction {
  Upstream,    // paths ending at the target (its suppliers)
  Downstream,  // paths starting at the target (its customers)
};

std::string_view to_string(Direction d) noexcept;
std::optional<Direction> parse_direction(std::string_view text);

struct NodeSpec {
  std::string label;
  HarmScore harm;
  std::string name;  // optional display name
};

struct EdgeSpec {
  std::string source;  // supplier
  std::string target;  // customer
};

class HarmGraph {
 public:
  HarmGraph() = default;

  std::size_t node_count() const noexcept { return labels_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  bool empty() const noexcept { return labels_.empty(); }
  bool contains(NodeId id) const noexcept { return id.index < labels_.size(); }

  const std::string& label(NodeId id) const;
  const std::string& display_name(NodeId id) const;
  double harm(NodeId id) const;
  std::span<const double> harms() const noexcept { return harms_; }

  std::optional<NodeId> find(std::string_view label) const;
  // Throws UnknownNode.
  NodeId require(std::string_view label) const;

  // Sorted by id, no duplicates. Throw UnknownNode for ids outside the graph.
  std::span<const NodeId> in_neighbors(NodeId id) const;
  std::span<const NodeId> out_neighbors(NodeId id) const;
  // Upstream -> suppliers, Downstream -> customers.
  std::span<const NodeId> neighbors(NodeId id, Direction dir) const;

  bool has_edge(NodeId from, NodeId to) const;
  // All edges as (supplier, customer), ordered by supplier then customer.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  // Subgraph induced on the nodes with keep[i] set. Relative order of the
  // surviving nodes is preserved, so ids stay deterministic.
  HarmGraph induced_subgraph(const std::vector<bool>& keep) const;
  // Copy with one harm replaced.
  HarmGraph with_harm(NodeId id, HarmScore harm) const;

  std::vector<NodeSpec> node_specs() const;
  std::vector<EdgeSpec> edge_specs() const;

 private:
  friend HarmGraph build_graph(std::span<const NodeSpec>, std::span<const EdgeSpec>);

  void check(NodeId id) const;

  std::vector<std::string> labels_;
  std::vector<std::string> names_;
  std::vector<double> harms_;
  std::vector<std::vector<NodeId>> in_;
  std::vector<std::vector<NodeId>> out_;
  std::unordered_map<std::string, NodeId> index_;
  std::size_t edge_count_ = 0;
};

// Errors: DuplicateNode, UnknownEndpoint, SelfLoop, DuplicateEdge.
// (HarmOutOfRange is raised when the HarmScore itself is constructed.)
HarmGraph build_graph(std::span<const NodeSpec> nodes, std::span<const EdgeSpec> edges);

// Maximal subgraph whose undirected projection has every degree >= k.
// Degrees count distinct neighbours, so a <-> b contributes 1.
HarmGraph k_core(const HarmGraph& g, int k);

struct SpectralEstimate {
  double value = 0.0;
  // Set when power iteration did not converge and `value` is the
  // max(in-degree, out-degree) upper bound instead.
  bool approximate = false;
  int iterations = 0;
};

// Largest adjacency eigenvalue modulus. Throws EmptyGraph.
SpectralEstimate spectral_radius_estimate(const HarmGraph& g, double rel_tol = 1e-8,
                                          int max_iterations = 10'000);

// Strongly connected components in a deterministic order (by smallest id).
std::vector<std::vector<NodeId>> strongly_connected_components(const HarmGraph& g);

}  // namespace netharm

template <>
struct std::hash<netharm::NodeId> {
  std::size_t operator()(netharm::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.index); }
};
