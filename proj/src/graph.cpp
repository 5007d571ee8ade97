#include "netharm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "netharm/errors.hpp"

namespace netharm {

HarmScore::HarmScore(double value) : value_(value) {
  if (!(value >= kMin && value <= kMax)) {
    throw Error(ErrorCode::HarmOutOfRange,
                "harm score " + std::to_string(value) + " outside [0, 100]");
  }
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::Upstream ? "upstream" : "downstream";
}

std::optional<Direction> parse_direction(std::string_view text) {
  if (text == "upstream") return Direction::Upstream;
  if (text == "downstream") return Direction::Downstream;
  return std::nullopt;
}

void HarmGraph::check(NodeId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::UnknownNode, "node id " + std::to_string(id.index) + " not in graph");
  }
}

const std::string& HarmGraph::label(NodeId id) const {
  check(id);
  return labels_[id.index];
}

const std::string& HarmGraph::display_name(NodeId id) const {
  check(id);
  return names_[id.index];
}

double HarmGraph::harm(NodeId id) const {
  check(id);
  return harms_[id.index];
}

std::optional<NodeId> HarmGraph::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeId HarmGraph::require(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw Error(ErrorCode::UnknownNode, "unknown node '" + std::string(label) + "'");
}

std::span<const NodeId> HarmGraph::in_neighbors(NodeId id) const {
  check(id);
  return in_[id.index];
}

std::span<const NodeId> HarmGraph::out_neighbors(NodeId id) const {
  check(id);
  return out_[id.index];
}

std::span<const NodeId> HarmGraph::neighbors(NodeId id, Direction dir) const {
  return dir == Direction::Upstream ? in_neighbors(id) : out_neighbors(id);
}

bool HarmGraph::has_edge(NodeId from, NodeId to) const {
  check(from);
  check(to);
  const auto& out = out_[from.index];
  return std::binary_search(out.begin(), out.end(), to);
}

std::vector<std::pair<NodeId, NodeId>> HarmGraph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> result;
  result.reserve(edge_count_);
  for (std::uint32_t u = 0; u < out_.size(); ++u) {
    for (NodeId v : out_[u]) result.emplace_back(NodeId{u}, v);
  }
  return result;
}

std::vector<NodeSpec> HarmGraph::node_specs() const {
  std::vector<NodeSpec> nodes;
  nodes.reserve(node_count());
  for (std::size_t i = 0; i < node_count(); ++i) {
    nodes.push_back({labels_[i], HarmScore(harms_[i]), names_[i]});
  }
  return nodes;
}

std::vector<EdgeSpec> HarmGraph::edge_specs() const {
  std::vector<EdgeSpec> result;
  result.reserve(edge_count_);
  for (auto [u, v] : edges()) result.push_back({labels_[u.index], labels_[v.index]});
  return result;
}

HarmGraph HarmGraph::induced_subgraph(const std::vector<bool>& keep) const {
  auto kept = [&](std::size_t i) { return i < keep.size() && keep[i]; };
  std::vector<NodeSpec> nodes;
  for (std::size_t i = 0; i < node_count(); ++i) {
    if (kept(i)) nodes.push_back({labels_[i], HarmScore(harms_[i]), names_[i]});
  }
  std::vector<EdgeSpec> kept_edges;
  for (auto [u, v] : edges()) {
    if (kept(u.index) && kept(v.index)) kept_edges.push_back({labels_[u.index], labels_[v.index]});
  }
  return build_graph(nodes, kept_edges);
}

HarmGraph HarmGraph::with_harm(NodeId id, HarmScore harm) const {
  check(id);
  HarmGraph copy = *this;
  copy.harms_[id.index] = harm.value();
  return copy;
}

HarmGraph build_graph(std::span<const NodeSpec> nodes, std::span<const EdgeSpec> edges) {
  HarmGraph g;
  const std::size_t n = nodes.size();
  g.labels_.reserve(n);
  g.names_.reserve(n);
  g.harms_.reserve(n);
  for (const auto& node : nodes) {
    const NodeId id{static_cast<std::uint32_t>(g.labels_.size())};
    if (!g.index_.emplace(node.label, id).second) {
      throw Error(ErrorCode::DuplicateNode, "duplicate node label '" + node.label + "'");
    }
    g.labels_.push_back(node.label);
    g.names_.push_back(node.name);
    g.harms_.push_back(node.harm.value());
  }
  g.in_.assign(n, {});
  g.out_.assign(n, {});
  for (const auto& edge : edges) {
    auto u = g.find(edge.source);
    auto v = g.find(edge.target);
    if (!u || !v) {
      throw Error(ErrorCode::UnknownEndpoint, "edge (" + edge.source + ", " + edge.target +
                                                  ") references unknown node '" +
                                                  (!u ? edge.source : edge.target) + "'");
    }
    if (*u == *v) {
      throw Error(ErrorCode::SelfLoop, "self-loop on node '" + edge.source + "'");
    }
    g.out_[u->index].push_back(*v);
    g.in_[v->index].push_back(*u);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& out = g.out_[i];
    std::sort(out.begin(), out.end());
    if (auto dup = std::adjacent_find(out.begin(), out.end()); dup != out.end()) {
      throw Error(ErrorCode::DuplicateEdge,
                  "duplicate edge (" + g.labels_[i] + ", " + g.labels_[dup->index] + ")");
    }
    std::sort(g.in_[i].begin(), g.in_[i].end());
    g.edge_count_ += out.size();
  }
  return g;
}

HarmGraph k_core(const HarmGraph& g, int k) {
  const std::size_t n = g.node_count();
  if (k <= 0) return g;

  // Undirected projection with distinct neighbours.
  std::vector<std::vector<NodeId>> adj(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& nb = adj[i];
    const auto in = g.in_neighbors(NodeId{i});
    const auto out = g.out_neighbors(NodeId{i});
    std::set_union(in.begin(), in.end(), out.begin(), out.end(), std::back_inserter(nb));
  }

  std::vector<int> degree(n);
  std::vector<bool> alive(n, true);
  std::deque<std::uint32_t> queue;
  for (std::uint32_t i = 0; i < n; ++i) {
    degree[i] = static_cast<int>(adj[i].size());
    if (degree[i] < k) {
      alive[i] = false;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (NodeId v : adj[u]) {
      if (alive[v.index] && --degree[v.index] < k) {
        alive[v.index] = false;
        queue.push_back(v.index);
      }
    }
  }
  return g.induced_subgraph(alive);
}

std::vector<std::vector<NodeId>> strongly_connected_components(const HarmGraph& g) {
  // Iterative Tarjan.
  const std::size_t n = g.node_count();
  constexpr int kUnvisited = -1;
  std::vector<int> index(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::uint32_t> stack;
  std::vector<std::vector<NodeId>> components;
  int counter = 0;

  struct Frame {
    std::uint32_t node;
    std::size_t next_child;
  };
  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& frame = call.back();
      const auto out = g.out_neighbors(NodeId{frame.node});
      if (frame.next_child < out.size()) {
        const auto w = out[frame.next_child++].index;
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[frame.node] = std::min(low[frame.node], index[w]);
        }
        continue;
      }
      const auto v = frame.node;
      call.pop_back();
      if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
      if (low[v] == index[v]) {
        std::vector<NodeId> component;
        std::uint32_t w = 0;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          component.push_back(NodeId{w});
        } while (w != v);
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
      }
    }
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return components;
}

namespace {

// Perron root of an irreducible component via power iteration on (B + I).
// The shift makes the iteration matrix primitive, so it converges even for
// periodic components such as plain cycles. Collatz-Wielandt bounds give a
// bracket on the root at every step.
std::optional<std::pair<double, int>> component_radius(const HarmGraph& g,
                                                       const std::vector<NodeId>& members,
                                                       double rel_tol, int max_iterations) {
  const std::size_t size = members.size();
  std::unordered_map<std::uint32_t, std::size_t> local;
  for (std::size_t i = 0; i < size; ++i) local.emplace(members[i].index, i);
  std::vector<std::vector<std::size_t>> in_local(size);
  for (std::size_t i = 0; i < size; ++i) {
    for (NodeId p : g.in_neighbors(members[i])) {
      if (auto it = local.find(p.index); it != local.end()) in_local[i].push_back(it->second);
    }
  }

  std::vector<double> x(size, 1.0), y(size);
  for (int iter = 1; iter <= max_iterations; ++iter) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      double sum = x[i];
      for (auto j : in_local[i]) sum += x[j];
      y[i] = sum;
      const double ratio = sum / x[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      norm += sum;
    }
    const double radius = 0.5 * (lo + hi) - 1.0;
    if (hi - lo <= rel_tol * std::max(radius, 1.0)) return std::pair{radius, iter};
    for (std::size_t i = 0; i < size; ++i) x[i] = y[i] / norm;
  }
  return std::nullopt;
}

}  // namespace

SpectralEstimate spectral_radius_estimate(const HarmGraph& g, double rel_tol, int max_iterations) {
  if (g.empty()) throw Error(ErrorCode::EmptyGraph, "spectral radius of an empty graph");

  // The spectrum of A is the union of the spectra of its strongly connected
  // components; singleton components contribute 0 since self-loops are banned.
  SpectralEstimate estimate;
  for (const auto& component : strongly_connected_components(g)) {
    if (component.size() < 2) continue;
    auto result = component_radius(g, component, rel_tol, max_iterations);
    if (!result) {
      std::size_t bound = 0;
      for (std::uint32_t i = 0; i < g.node_count(); ++i) {
        bound = std::max({bound, g.in_neighbors(NodeId{i}).size(), g.out_neighbors(NodeId{i}).size()});
      }
      return {static_cast<double>(bound), true, max_iterations};
    }
    estimate.value = std::max(estimate.value, result->first);
    estimate.iterations = std::max(estimate.iterations, result->second);
  }
  return estimate;
}

}  // namespace netharm
