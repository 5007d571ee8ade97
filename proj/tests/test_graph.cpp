#include <doctest.h>

#include <random>

#include "netharm/errors.hpp"
#include "netharm/fixtures.hpp"
#include "netharm/graph.hpp"
#include "oracles.hpp"

using namespace netharm;

namespace {

// a is supplied by e and d, supplies f and d; c reaches a directly and via b.
HarmGraph small_network() {
  std::vector<NodeSpec> nodes{{"a", HarmScore(20), {}}, {"b", HarmScore(10), {}}, {"c", HarmScore(30), {}},
                              {"d", HarmScore(90), {}}, {"e", HarmScore(80), {}}, {"f", HarmScore(95), {}}};
  std::vector<EdgeSpec> edges{{"e", "a"}, {"d", "a"}, {"c", "a"}, {"c", "b"}, {"b", "a"}, {"a", "f"}, {"a", "d"}};
  return build_graph(nodes, edges);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("single edge graph") {
  std::vector<NodeSpec> nodes{{"a", HarmScore(0), {}}, {"b", HarmScore(50), {}}};
  std::vector<EdgeSpec> edges{{"b", "a"}};
  const auto g = build_graph(nodes, edges);
  CHECK(g.node_count() == 2);
  CHECK(g.edge_count() == 1);
  const auto a = g.require("a");
  const auto b = g.require("b");
  CHECK(a.index == 0);
  CHECK(b.index == 1);
  REQUIRE(g.in_neighbors(a).size() == 1);
  CHECK(g.in_neighbors(a)[0] == b);
  CHECK(g.out_neighbors(a).empty());
  CHECK(g.has_edge(b, a));
  CHECK_FALSE(g.has_edge(a, b));
}

TEST_CASE("neighbourhoods of the small network") {
  const auto g = small_network();
  const auto a = g.require("a");
  std::set<std::string> in, out;
  for (NodeId n : g.in_neighbors(a)) in.insert(g.label(n));
  for (NodeId n : g.out_neighbors(a)) out.insert(g.label(n));
  CHECK(in == std::set<std::string>{"b", "c", "d", "e"});
  CHECK(out == std::set<std::string>{"d", "f"});
  CHECK(g.out_neighbors(g.require("f")).empty());
}

TEST_CASE("construction errors") {
  std::vector<NodeSpec> two{{"a", HarmScore(0), {}}, {"b", HarmScore(0), {}}};
  CHECK(code_of([&] { build_graph(two, std::vector<EdgeSpec>{{"a", "a"}}); }) == ErrorCode::SelfLoop);
  CHECK(code_of([&] { build_graph(two, std::vector<EdgeSpec>{{"a", "z"}}); }) == ErrorCode::UnknownEndpoint);
  CHECK(code_of([&] { build_graph(two, std::vector<EdgeSpec>{{"a", "b"}, {"a", "b"}}); }) ==
        ErrorCode::DuplicateEdge);
  std::vector<NodeSpec> dup{{"a", HarmScore(0), {}}, {"a", HarmScore(1), {}}};
  CHECK(code_of([&] { build_graph(dup, std::vector<EdgeSpec>{}); }) == ErrorCode::DuplicateNode);
  CHECK(code_of([] { HarmScore(100.5); }) == ErrorCode::HarmOutOfRange);
  CHECK(code_of([] { HarmScore(-1); }) == ErrorCode::HarmOutOfRange);
  const auto g = build_graph(two, std::vector<EdgeSpec>{});
  CHECK(code_of([&] { g.in_neighbors(NodeId{7}); }) == ErrorCode::UnknownNode);
  CHECK(code_of([&] { g.require("zz"); }) == ErrorCode::UnknownNode);
}

TEST_CASE("neighbour lists match adjacency scans on random graphs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_graph(rng, 2 + rng() % 7, 0.3);
    const auto e = oracle::adjacency(g);
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
      std::vector<NodeId> col, row;
      for (std::uint32_t j = 0; j < g.node_count(); ++j) {
        if (e[j][i] != 0.0) col.push_back(NodeId{j});
        if (e[i][j] != 0.0) row.push_back(NodeId{j});
      }
      const auto in = g.in_neighbors(NodeId{i});
      const auto out = g.out_neighbors(NodeId{i});
      CHECK(std::vector<NodeId>(in.begin(), in.end()) == col);
      CHECK(std::vector<NodeId>(out.begin(), out.end()) == row);
      for (NodeId b : in) {
        const auto back = g.out_neighbors(b);
        CHECK(std::find(back.begin(), back.end(), NodeId{i}) != back.end());
      }
    }
  }
}

TEST_CASE("k-core") {
  const auto cycle = fixture("cycle").graph();
  CHECK(k_core(cycle, 2).node_count() == 3);
  CHECK(k_core(cycle, 2).edge_count() == 3);
  CHECK(k_core(cycle, 3).empty());
  CHECK(k_core(fixture("star").graph(), 2).empty());

  // a <-> b counts once toward each degree
  std::vector<NodeSpec> nodes{{"a", HarmScore(0), {}}, {"b", HarmScore(0), {}}};
  std::vector<EdgeSpec> both{{"a", "b"}, {"b", "a"}};
  CHECK(k_core(build_graph(nodes, both), 1).node_count() == 2);
  CHECK(k_core(build_graph(nodes, both), 2).empty());

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_graph(rng, 4 + rng() % 9, 0.3);
    CHECK(k_core(g, 0).node_count() == g.node_count());
    CHECK(k_core(g, 0).edge_count() == g.edge_count());
    std::set<std::string> previous;
    for (std::uint32_t i = 0; i < g.node_count(); ++i) previous.insert(g.label(NodeId{i}));
    for (int k = 1; k <= 4; ++k) {
      const auto core = k_core(g, k);
      std::set<std::string> labels;
      for (std::uint32_t i = 0; i < core.node_count(); ++i) labels.insert(core.label(NodeId{i}));
      CHECK(labels == oracle::k_core_labels(g, k));
      CHECK(std::includes(previous.begin(), previous.end(), labels.begin(), labels.end()));
      // induced edges are retained
      for (auto [u, v] : g.edges()) {
        if (labels.contains(g.label(u)) && labels.contains(g.label(v))) {
          CHECK(core.has_edge(core.require(g.label(u)), core.require(g.label(v))));
        }
      }
      previous = labels;
    }
  }
}

TEST_CASE("spectral radius") {
  CHECK(spectral_radius_estimate(fixture("cycle").graph()).value == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  for (int i = 0; i < 4; ++i) nodes.push_back({oracle::label(i), HarmScore(0), {}});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) edges.push_back({oracle::label(i), oracle::label(j)});
  CHECK(spectral_radius_estimate(build_graph(nodes, edges)).value == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(spectral_radius_estimate(fixture("fig5a").graph()).value == doctest::Approx(0.0));

  CHECK(code_of([] { spectral_radius_estimate(HarmGraph{}); }) == ErrorCode::EmptyGraph);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = oracle::random_graph(rng, 1 + rng() % 8, 0.3);
    const auto estimate = spectral_radius_estimate(g);
    CHECK_FALSE(estimate.approximate);
    CHECK(std::abs(estimate.value - oracle::spectral_radius(g)) < 1e-6);
  }
}

TEST_CASE("strongly connected components") {
  const auto sccs = strongly_connected_components(fixture("fig5c").graph());
  const auto g = fixture("fig5c").graph();
  std::size_t loops = 0;
  for (const auto& c : sccs) {
    if (c.size() > 1) {
      ++loops;
      std::set<std::string> labels;
      for (NodeId n : c) labels.insert(g.label(n));
      CHECK(labels == std::set<std::string>{"n75", "n85"});
    }
  }
  CHECK(loops == 1);
}

TEST_CASE("relabeling gives isomorphic graphs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = oracle::random_graph(rng, 2 + rng() % 7, 0.3);
    auto nodes = g.node_specs();
    auto edges = g.edge_specs();
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::shuffle(edges.begin(), edges.end(), rng);
    const auto h = build_graph(nodes, edges);
    for (auto [u, v] : g.edges()) CHECK(h.has_edge(h.require(g.label(u)), h.require(g.label(v))));
    CHECK(h.edge_count() == g.edge_count());
    CHECK(spectral_radius_estimate(h).value == doctest::Approx(spectral_radius_estimate(g).value));
  }
}
