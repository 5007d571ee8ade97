#include "netharm/whatif.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "netharm/errors.hpp"

namespace netharm {

namespace {

// Runs fn(i) for i in [0, count) on a fixed set of workers. The first
// exception thrown by any worker is rethrown on the caller's thread.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void check_pair(const HarmGraph& g, NodeId target, NodeId b) {
  if (!g.contains(target) || !g.contains(b)) {
    throw Error(ErrorCode::UnknownNode, "unknown node id in what-if query");
  }
  if (target == b) {
    throw Error(ErrorCode::SelfQuery, "what-if node equals the target '" + g.label(target) + "'");
  }
}

HarmGraph without_node(const HarmGraph& g, NodeId b) {
  std::vector<bool> keep(g.node_count(), true);
  keep[b.index] = false;
  return g.induced_subgraph(keep);
}

}  // namespace

void validate(const HarmGraph& g, const ScenarioOverlay& overlay) {
  for (const auto& [node, harm] : overlay.harm_overrides) {
    if (!g.contains(node)) throw Error(ErrorCode::InvalidOverlay, "override on unknown node");
    if (overlay.removed_nodes.contains(node)) {
      throw Error(ErrorCode::InvalidOverlay,
                  "node '" + g.label(node) + "' is both overridden and removed");
    }
  }
  for (NodeId node : overlay.removed_nodes) {
    if (!g.contains(node)) throw Error(ErrorCode::InvalidOverlay, "removal of unknown node");
  }
}

OverlaidGraph apply_overlay(const HarmGraph& g, const ScenarioOverlay& overlay) {
  validate(g, overlay);
  const std::size_t n = g.node_count();
  std::vector<bool> keep(n, true);
  for (NodeId node : overlay.removed_nodes) keep[node.index] = false;

  auto nodes = g.node_specs();
  for (const auto& [node, harm] : overlay.harm_overrides) nodes[node.index].harm = harm;
  std::vector<NodeSpec> kept_nodes;
  OverlaidGraph out;
  out.id_map.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    out.id_map[i] = NodeId{static_cast<std::uint32_t>(kept_nodes.size())};
    kept_nodes.push_back(std::move(nodes[i]));
  }
  std::vector<EdgeSpec> kept_edges;
  for (auto [u, v] : g.edges()) {
    if (keep[u.index] && keep[v.index]) kept_edges.push_back({g.label(u), g.label(v)});
  }
  out.graph = build_graph(kept_nodes, kept_edges);
  return out;
}

double scored_with(const HarmGraph& g, const ScenarioOverlay& overlay, NodeId target,
                   const HarmConfig& cfg) {
  if (!g.contains(target)) throw Error(ErrorCode::UnknownNode, "unknown target id");
  if (overlay.removed_nodes.contains(target)) {
    throw Error(ErrorCode::InvalidOverlay, "the target '" + g.label(target) + "' cannot be removed");
  }
  if (overlay.empty()) return network_harm(g, target, cfg);
  const auto overlaid = apply_overlay(g, overlay);
  return network_harm(overlaid.graph, *overlaid.id_map[target.index], cfg);
}

double vulnerability(const HarmGraph& g, NodeId target, NodeId b, const HarmConfig& cfg) {
  check_pair(g, target, b);
  ScenarioOverlay worst;
  worst.harm_overrides.emplace(b, HarmScore(HarmScore::kMax));
  return scored_with(g, worst, target, cfg) - network_harm(g, target, cfg);
}

double influence(const HarmGraph& g, NodeId target, NodeId b, const HarmConfig& cfg) {
  check_pair(g, target, b);
  ScenarioOverlay removal;
  removal.removed_nodes.insert(b);
  return scored_with(g, removal, target, cfg) - network_harm(g, target, cfg);
}

double global_influence(const HarmGraph& g, NodeId b, const HarmConfig& cfg) {
  if (!g.contains(b)) throw Error(ErrorCode::UnknownNode, "unknown node id");
  const auto reduced = without_node(g, b);
  double total = 0.0;
  for (std::uint32_t i = 0; i < g.node_count(); ++i) {
    const NodeId n{i};
    if (n == b) continue;
    const NodeId reduced_id{i < b.index ? i : i - 1};
    total += network_harm(reduced, reduced_id, cfg) - network_harm(g, n, cfg);
  }
  return total;
}

std::vector<double> network_harm_all(const HarmGraph& g, const HarmConfig& cfg, unsigned threads) {
  std::vector<double> out(g.node_count());
  parallel_for(g.node_count(), threads,
               [&](std::size_t i) { out[i] = network_harm(g, NodeId{static_cast<std::uint32_t>(i)}, cfg); });
  return out;
}

double InfluenceMatrix::global_influence(NodeId b) const {
  double total = 0.0;
  for (std::size_t t = 0; t < n_; ++t) total += values_[t * n_ + b.index];
  return total;
}

InfluenceMatrix influence_matrix(const HarmGraph& g, const HarmConfig& cfg, unsigned threads) {
  const std::size_t n = g.node_count();
  InfluenceMatrix matrix(n);
  const auto baseline = network_harm_all(g, cfg, threads);
  parallel_for(n, threads, [&](std::size_t column) {
    const NodeId b{static_cast<std::uint32_t>(column)};
    const auto reduced = without_node(g, b);
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i == b.index) continue;
      const NodeId reduced_id{i < b.index ? i : i - 1};
      matrix(NodeId{i}, b) = network_harm(reduced, reduced_id, cfg) - baseline[i];
    }
  });
  return matrix;
}

std::string_view to_string(ReportKind kind) noexcept {
  switch (kind) {
    case ReportKind::Vulnerability: return "vulnerability";
    case ReportKind::Influence: return "influence";
    case ReportKind::GlobalInfluence: return "global";
  }
  return "?";
}

std::optional<ReportKind> parse_report_kind(std::string_view text) {
  for (auto kind : {ReportKind::Vulnerability, ReportKind::Influence, ReportKind::GlobalInfluence}) {
    if (text == to_string(kind)) return kind;
  }
  return std::nullopt;
}

void sort_ranking(std::vector<RankedNode>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RankedNode& a, const RankedNode& b) {
    const double ma = std::abs(a.score);
    const double mb = std::abs(b.score);
    if (ma != mb) return ma > mb;
    return a.label < b.label;
  });
}

InfluenceReport rank_report(const HarmGraph& g, std::optional<NodeId> target, ReportKind kind,
                            const HarmConfig& cfg, std::size_t top_n, unsigned threads) {
  InfluenceReport report;
  report.kind = kind;
  report.config = cfg;
  const std::size_t n = g.node_count();
  std::vector<double> scores(n, 0.0);

  if (kind == ReportKind::GlobalInfluence) {
    const auto matrix = influence_matrix(g, cfg, threads);
    for (std::uint32_t b = 0; b < n; ++b) scores[b] = matrix.global_influence(NodeId{b});
  } else {
    if (!target || !g.contains(*target)) {
      throw Error(ErrorCode::UnknownNode, "ranking needs a target in the graph");
    }
    report.target = target;
    const NodeId t = *target;
    if (kind == ReportKind::Vulnerability) {
      // The decomposition does not depend on harms, so it is shared.
      validate(cfg);
      const int m_max = resolve_m_max(g, cfg);
      const auto dec = decompose(g, t, cfg.direction, cfg.scheme, m_max);
      std::vector<double> harms(g.harms().begin(), g.harms().end());
      const double base = combine_levels(cfg.outer, cfg.alpha, level_harms(dec, harms, cfg.inner));
      for (std::uint32_t b = 0; b < n; ++b) {
        if (b == t.index || !dec.contains(NodeId{b})) continue;
        const double saved = harms[b];
        harms[b] = HarmScore::kMax;
        scores[b] = combine_levels(cfg.outer, cfg.alpha, level_harms(dec, harms, cfg.inner)) - base;
        harms[b] = saved;
      }
    } else {
      parallel_for(n, threads, [&](std::size_t b) {
        if (b != t.index) scores[b] = influence(g, t, NodeId{static_cast<std::uint32_t>(b)}, cfg);
      });
    }
  }

  for (std::uint32_t b = 0; b < n; ++b) {
    if (target && b == target->index) continue;
    report.entries.push_back({NodeId{b}, g.label(NodeId{b}), scores[b]});
  }
  sort_ranking(report.entries);
  if (top_n > 0 && report.entries.size() > top_n) report.entries.resize(top_n);
  return report;
}

}  // namespace netharm
