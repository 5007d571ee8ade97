#include "netharm/paths.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>

#include "netharm/errors.hpp"

namespace netharm {

std::string_view to_string(PathScheme scheme) noexcept {
  switch (scheme) {
    case PathScheme::AllPaths: return "all";
    case PathScheme::SimplePaths: return "simple";
    case PathScheme::AllShortestPaths: return "shortest-all";
    case PathScheme::SingleShortestPath: return "shortest-single";
  }
  return "?";
}

std::optional<PathScheme> parse_scheme(std::string_view text) {
  for (auto scheme : {PathScheme::AllPaths, PathScheme::SimplePaths, PathScheme::AllShortestPaths,
                      PathScheme::SingleShortestPath}) {
    if (text == to_string(scheme)) return scheme;
  }
  return std::nullopt;
}

std::string to_string(PathCount count) {
  if (count == 0) return "0";
  std::string digits;
  while (count > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(count % 10)));
    count /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

double to_double(PathCount count) noexcept { return static_cast<double>(count); }

PathCount LevelMultiset::total() const noexcept {
  PathCount sum = 0;
  for (const auto& e : entries) sum += e.multiplicity;
  return sum;
}

PathCount LevelMultiset::multiplicity(NodeId node) const noexcept {
  auto it = std::lower_bound(entries.begin(), entries.end(), node,
                             [](const LevelEntry& e, NodeId id) { return e.node < id; });
  return (it != entries.end() && it->node == node) ? it->multiplicity : 0;
}

bool LevelDecomposition::all_empty() const noexcept {
  return std::all_of(levels.begin(), levels.end(), [](const auto& l) { return l.empty(); });
}

bool LevelDecomposition::contains(NodeId node) const noexcept {
  return std::any_of(levels.begin(), levels.end(),
                     [node](const auto& l) { return l.multiplicity(node) > 0; });
}

namespace {

void check_query(const HarmGraph& g, NodeId target, int m_max) {
  if (!g.contains(target)) {
    throw Error(ErrorCode::UnknownNode, "target id " + std::to_string(target.index) + " not in graph");
  }
  if (m_max < 1) {
    throw Error(ErrorCode::InvalidMMax, "m_max must be >= 1, got " + std::to_string(m_max));
  }
}

PathCount checked_add(PathCount a, PathCount b) {
  PathCount out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw Error(ErrorCode::PathCountOverflow, "path count exceeds 128-bit range");
  }
  return out;
}

LevelDecomposition empty_decomposition(NodeId target, Direction dir, PathScheme scheme, int m_max) {
  LevelDecomposition dec{target, dir, scheme, m_max, {}};
  dec.levels.resize(static_cast<std::size_t>(m_max));
  for (int m = 1; m <= m_max; ++m) dec.levels[static_cast<std::size_t>(m - 1)].level = m;
  return dec;
}

// Converts a dense per-node count vector into a level multiset, dropping
// the target.
void fill_level(LevelMultiset& level, const std::vector<PathCount>& counts, NodeId target) {
  for (std::uint32_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0 && i != target.index) level.entries.push_back({NodeId{i}, counts[i]});
  }
}

// Walk counts level by level: counts_m(u) = sum over v with u a step
// neighbour of v of counts_{m-1}(v). Walks may pass through the target, but
// none may start there.
void decompose_all_paths(const HarmGraph& g, LevelDecomposition& dec) {
  const std::size_t n = g.node_count();
  std::vector<PathCount> current(n, 0), next(n, 0);
  current[dec.target.index] = 1;
  for (auto& level : dec.levels) {
    std::fill(next.begin(), next.end(), PathCount{0});
    bool any = false;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (current[v] == 0) continue;
      for (NodeId u : g.neighbors(NodeId{v}, dec.direction)) {
        next[u.index] = checked_add(next[u.index], current[v]);
        any = true;
      }
    }
    std::swap(current, next);
    fill_level(level, current, dec.target);
    if (!any) break;
  }
}

void decompose_simple_paths(const HarmGraph& g, LevelDecomposition& dec, std::uint64_t budget) {
  const std::size_t n = g.node_count();
  const int depth_limit = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(dec.m_max), n - 1));
  std::vector<std::vector<PathCount>> counts(static_cast<std::size_t>(depth_limit) + 1,
                                             std::vector<PathCount>(n, 0));
  std::vector<bool> on_path(n, false);
  std::uint64_t explored = 0;

  struct Frame {
    NodeId node;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{dec.target, 0}};
  on_path[dec.target.index] = true;
  while (!stack.empty()) {
    auto& frame = stack.back();
    const auto nb = g.neighbors(frame.node, dec.direction);
    const int depth = static_cast<int>(stack.size()) - 1;
    if (depth < depth_limit && frame.next_child < nb.size()) {
      const NodeId u = nb[frame.next_child++];
      if (on_path[u.index]) continue;
      if (++explored > budget) {
        throw Error(ErrorCode::BudgetExceeded,
                    "simple path budget of " + std::to_string(budget) + " exceeded");
      }
      counts[static_cast<std::size_t>(depth + 1)][u.index] += 1;
      on_path[u.index] = true;
      stack.push_back({u, 0});
      continue;
    }
    on_path[frame.node.index] = false;
    stack.pop_back();
  }
  for (int m = 1; m <= depth_limit; ++m) {
    fill_level(dec.levels[static_cast<std::size_t>(m - 1)], counts[static_cast<std::size_t>(m)], dec.target);
  }
}

// BFS from the target with shortest-path counting.
void decompose_shortest(const HarmGraph& g, LevelDecomposition& dec, bool single) {
  const std::size_t n = g.node_count();
  constexpr int kUnreached = -1;
  std::vector<int> dist(n, kUnreached);
  std::vector<PathCount> sigma(n, 0);
  std::deque<NodeId> queue{dec.target};
  dist[dec.target.index] = 0;
  sigma[dec.target.index] = 1;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    const int d = dist[v.index];
    if (d >= dec.m_max) continue;
    for (NodeId u : g.neighbors(v, dec.direction)) {
      if (dist[u.index] == kUnreached) {
        dist[u.index] = d + 1;
        queue.push_back(u);
      }
      if (dist[u.index] == d + 1) sigma[u.index] = checked_add(sigma[u.index], sigma[v.index]);
    }
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    if (i == dec.target.index || dist[i] < 1 || dist[i] > dec.m_max) continue;
    dec.levels[static_cast<std::size_t>(dist[i] - 1)].entries.push_back(
        {NodeId{i}, single ? PathCount{1} : sigma[i]});
  }
}

}  // namespace

LevelDecomposition decompose(const HarmGraph& g, NodeId target, Direction dir, PathScheme scheme,
                             int m_max, const DecomposeOptions& options) {
  check_query(g, target, m_max);
  auto dec = empty_decomposition(target, dir, scheme, m_max);
  switch (scheme) {
    case PathScheme::AllPaths:
      decompose_all_paths(g, dec);
      break;
    case PathScheme::SimplePaths:
      decompose_simple_paths(g, dec, options.simple_path_budget);
      break;
    case PathScheme::AllShortestPaths:
      decompose_shortest(g, dec, false);
      break;
    case PathScheme::SingleShortestPath:
      decompose_shortest(g, dec, true);
      break;
  }
  return dec;
}

namespace {

// Depth-first listing of step sequences starting at the target.
class PathLister {
 public:
  PathLister(const HarmGraph& g, Direction dir, bool simple, int max_len)
      : g_(g), dir_(dir), simple_(simple), max_len_(max_len), on_path_(g.node_count(), false) {}

  std::vector<std::vector<NodeId>> run(NodeId target) {
    walk_.assign(1, target);
    on_path_[target.index] = true;
    extend();
    return std::move(found_);
  }

 private:
  void extend() {
    const NodeId last = walk_.back();
    if (walk_.size() > 1 && last != walk_.front()) found_.push_back(walk_);
    if (static_cast<int>(walk_.size()) - 1 == max_len_) return;
    for (NodeId u : g_.neighbors(last, dir_)) {
      if (simple_ && on_path_[u.index]) continue;
      walk_.push_back(u);
      const bool was_on_path = on_path_[u.index];
      on_path_[u.index] = true;
      extend();
      on_path_[u.index] = was_on_path;
      walk_.pop_back();
    }
  }

  const HarmGraph& g_;
  Direction dir_;
  bool simple_;
  int max_len_;
  std::vector<bool> on_path_;
  std::vector<NodeId> walk_;
  std::vector<std::vector<NodeId>> found_;
};

}  // namespace

std::vector<std::vector<NodeId>> enumerate_paths_oracle(const HarmGraph& g, NodeId target,
                                                        Direction dir, PathScheme scheme, int m_max,
                                                        const OracleOptions& options) {
  check_query(g, target, m_max);
  if (g.node_count() > options.max_nodes) {
    throw Error(ErrorCode::GraphTooLarge, "path oracle limited to " + std::to_string(options.max_nodes) +
                                              " nodes, graph has " + std::to_string(g.node_count()));
  }

  std::vector<std::vector<NodeId>> walks;
  if (scheme == PathScheme::AllPaths) {
    walks = PathLister(g, dir, false, m_max).run(target);
  } else if (scheme == PathScheme::SimplePaths) {
    walks = PathLister(g, dir, true, m_max).run(target);
  } else {
    // Every simple path regardless of depth, then keep the minimal-length
    // ones per endpoint.
    auto all = PathLister(g, dir, true, static_cast<int>(g.node_count())).run(target);
    std::map<NodeId, std::size_t> shortest;
    for (const auto& w : all) {
      auto [it, inserted] = shortest.emplace(w.back(), w.size());
      if (!inserted) it->second = std::min(it->second, w.size());
    }
    std::map<NodeId, std::vector<NodeId>> representative;
    for (auto& w : all) {
      if (w.size() != shortest[w.back()] || static_cast<int>(w.size()) - 1 > m_max) continue;
      if (scheme == PathScheme::SingleShortestPath) {
        auto [it, inserted] = representative.emplace(w.back(), w);
        if (!inserted && w < it->second) it->second = w;
      } else {
        walks.push_back(std::move(w));
      }
    }
    for (auto& [node, w] : representative) walks.push_back(std::move(w));
  }

  if (dir == Direction::Upstream) {
    for (auto& w : walks) std::reverse(w.begin(), w.end());
  }
  std::sort(walks.begin(), walks.end());
  return walks;
}

LevelDecomposition collapse_paths(const std::vector<std::vector<NodeId>>& paths, NodeId target,
                                  Direction dir, PathScheme scheme, int m_max) {
  auto dec = empty_decomposition(target, dir, scheme, m_max);
  std::vector<std::map<NodeId, PathCount>> counts(static_cast<std::size_t>(m_max));
  for (const auto& path : paths) {
    const auto length = static_cast<int>(path.size()) - 1;
    if (length < 1 || length > m_max) continue;
    const NodeId origin = dir == Direction::Upstream ? path.front() : path.back();
    counts[static_cast<std::size_t>(length - 1)][origin] += 1;
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (auto [node, count] : counts[i]) dec.levels[i].entries.push_back({node, count});
  }
  return dec;
}

}  // namespace netharm
