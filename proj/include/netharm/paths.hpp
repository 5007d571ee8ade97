#pragma once

// Level decompositions: for a target node and each path length m, the
// multiset of nodes that originate (upstream) or terminate (downstream) a
// qualifying path of length m. The target itself never appears.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netharm/graph.hpp"

namespace netharm {

enum class PathScheme {
  AllPaths,            // every walk, one count per walk; needs a finite depth
  SimplePaths,         // loop-free paths, one count per path
  AllShortestPaths,    // shortest paths only, one count per path
  SingleShortestPath,  // each node once, at its shortest distance
};

std::string_view to_string(PathScheme scheme) noexcept;
std::optional<PathScheme> parse_scheme(std::string_view text);

// Walk counts grow like lambda_max^m; 64 bits run out quickly on dense
// graphs at the depths the reduction check needs.
__extension__ using PathCount = unsigned __int128;

std::string to_string(PathCount count);
double to_double(PathCount count) noexcept;

struct LevelEntry {
  NodeId node;
  PathCount multiplicity = 0;

  friend bool operator==(const LevelEntry&, const LevelEntry&) = default;
};

struct LevelMultiset {
  int level = 0;
  std::vector<LevelEntry> entries;  // sorted by node id, multiplicity >= 1

  bool empty() const noexcept { return entries.empty(); }
  PathCount total() const noexcept;
  PathCount multiplicity(NodeId node) const noexcept;

  friend bool operator==(const LevelMultiset&, const LevelMultiset&) = default;
};

struct LevelDecomposition {
  NodeId target;
  Direction direction = Direction::Upstream;
  PathScheme scheme = PathScheme::AllShortestPaths;
  int m_max = 1;
  std::vector<LevelMultiset> levels;  // exactly m_max entries, levels[i].level == i + 1

  bool all_empty() const noexcept;
  // Whether `node` appears at any level.
  bool contains(NodeId node) const noexcept;

  friend bool operator==(const LevelDecomposition&, const LevelDecomposition&) = default;
};

struct DecomposeOptions {
  // Upper bound on simple paths explored per query; BudgetExceeded beyond it.
  std::uint64_t simple_path_budget = 10'000'000;
};

// Errors: UnknownNode, InvalidMMax, BudgetExceeded, PathCountOverflow.
LevelDecomposition decompose(const HarmGraph& g, NodeId target, Direction dir, PathScheme scheme,
                             int m_max, const DecomposeOptions& options = {});

// Exhaustive listing, used to cross-check decompose on small graphs.
struct OracleOptions {
  std::size_t max_nodes = 12;
};

// Each path is listed in edge order: origin ... target for Upstream,
// target ... endpoint for Downstream. Errors: GraphTooLarge, UnknownNode,
// InvalidMMax.
std::vector<std::vector<NodeId>> enumerate_paths_oracle(const HarmGraph& g, NodeId target,
                                                        Direction dir, PathScheme scheme, int m_max,
                                                        const OracleOptions& options = {});

// Collapses explicit paths into per-level origin (or endpoint) multisets.
LevelDecomposition collapse_paths(const std::vector<std::vector<NodeId>>& paths, NodeId target,
                                  Direction dir, PathScheme scheme, int m_max);

}  // namespace netharm
