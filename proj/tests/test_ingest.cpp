#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "netharm/csv.hpp"
#include "netharm/errors.hpp"
#include "netharm/fixtures.hpp"
#include "netharm/ingest.hpp"

using namespace netharm;
namespace fs = std::filesystem;

namespace {

HarmGraph load(const std::string& nodes, const std::string& edges, const AliasMap& aliases = {}) {
  std::istringstream n(nodes), e(edges);
  return load_graph(n, e, aliases);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::EmptyGraph;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("netharm_ingest_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::set<std::pair<std::string, std::string>> edge_set(const HarmGraph& g) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& e : g.edge_specs()) out.emplace(e.source, e.target);
  return out;
}

}  // namespace

TEST_CASE("two-node graph from tables") {
  const auto g = load("label,harm\na,0\nb,40\n", "src,dst\nb,a\n");
  CHECK(g.node_count() == 2);
  CHECK(g.harm(g.require("b")) == 40);
  CHECK(g.has_edge(g.require("b"), g.require("a")));
}

TEST_CASE("comments, quoting and display names") {
  const auto g = load("# exported\nlabel,harm,name\na,0,\"Acme, Inc.\"\n\"b\"\"x\",12.5,Beta\n", "src,dst\n\"b\"\"x\",a\n");
  CHECK(g.display_name(g.require("a")) == "Acme, Inc.");
  CHECK(g.harm(g.require("b\"x")) == 12.5);
  CHECK(csv::escape("Acme, Inc.") == "\"Acme, Inc.\"");
  CHECK(csv::escape("q\"") == "\"q\"\"\"");
  CHECK(csv::escape("plain") == "plain");
}

TEST_CASE("parse errors carry exact locations") {
  try {
    load("label,harm\na,0\nb,abc\n", "src,dst\n");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() == 3);
    CHECK(e.source() == "nodes");
    CHECK(std::string(e.what()).find("abc") != std::string::npos);
  }
  try {
    load("label,harm\na,0\n", "src,dst\n\"a,b\n");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.source() == "edges");
  }
  try {
    load("name,harm\na,0\n", "src,dst\n");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  CHECK(code_of([] { load("label,harm\na,120\n", "src,dst\n"); }) == ErrorCode::ConstraintViolation);
  CHECK(code_of([] { load("label,harm\na,1\na,2\n", "src,dst\n"); }) == ErrorCode::ConstraintViolation);
  CHECK(code_of([] { load("label,harm\na,1\n", "src,dst\na,z\n"); }) == ErrorCode::ConstraintViolation);
  CHECK(code_of([] { load("label,harm\na,1\nb,2\n", "src,dst\na,a\n"); }) == ErrorCode::ConstraintViolation);
  CHECK(code_of([] { load("label,harm\na,1\nb,2\n", "src,dst\na,b\na,b\n"); }) == ErrorCode::ConstraintViolation);
  CHECK(code_of([] { load("label,harm\n,1\n", "src,dst\n"); }) == ErrorCode::ConstraintViolation);
  try {
    load("label,harm\na,1\n", "src,dst\na,zz\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).starts_with("edges:2:3:"));
  }
}

TEST_CASE("aliases merge branches onto one entity") {
  const AliasMap aliases{{"acme-uk", "acme"}, {"acme-de", "acme"}};
  const auto g = load("label,harm\nacme,30\nacme-uk,90\nacme-de,10\nbeta,50\ngamma,70\n",
                      "src,dst\nbeta,acme-uk\nbeta,acme-de\nacme-uk,acme-de\ngamma,acme\n", aliases);
  CHECK(g.node_count() == 3);
  CHECK(g.harm(g.require("acme")) == 30);
  CHECK(edge_set(g) == std::set<std::pair<std::string, std::string>>{{"beta", "acme"}, {"gamma", "acme"}});
  CHECK(code_of([&] { load("label,harm\nacme-uk,90\nb,1\n", "src,dst\n", aliases); }) == ErrorCode::ConstraintViolation);
}

TEST_CASE("table and JSON round trips") {
  std::mt19937_64 rng(3);
  for (const auto& name : fixture_names()) {
    const auto g = fixture(name).graph();
    std::ostringstream nodes, edges;
    write_node_table(g, nodes);
    write_edge_table(g, edges);
    const auto back = load(nodes.str(), edges.str());
    CHECK(back.node_specs().size() == g.node_count());
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
      const auto id = back.require(g.label(NodeId{i}));
      CHECK(back.harm(id) == g.harm(NodeId{i}));
    }
    CHECK(edge_set(back) == edge_set(g));

    const auto doc = graph_to_json(g);
    const auto from_json = graph_from_json(nlohmann::json::parse(doc.dump()));
    CHECK(graph_to_json(from_json) == doc);
  }
  // non-round harms survive the text form exactly
  std::vector<NodeSpec> specs{{"a", HarmScore(100.0 / 3), {}}, {"b", HarmScore(0.1 + 0.2), "B"}};
  const auto g = build_graph(specs, std::vector<EdgeSpec>{{"a", "b"}});
  std::ostringstream nodes, edges;
  write_node_table(g, nodes);
  write_edge_table(g, edges);
  const auto back = load(nodes.str(), edges.str());
  CHECK(back.harm(back.require("a")) == 100.0 / 3);
  CHECK(back.display_name(back.require("b")) == "B");

  CHECK(code_of([] { graph_from_json(nlohmann::json::parse(R"({"nodes":[]})")); }) == ErrorCode::ConstraintViolation);
  CHECK(code_of([] {
          graph_from_json(nlohmann::json::parse(R"({"nodes":[{"id":0,"label":"a","harm":1}],"edges":[[0,3]]})"));
        }) == ErrorCode::ConstraintViolation);
}

TEST_CASE("fixture files load back to the same graph") {
  const auto dir = scratch("fixtures");
  for (const auto& name : fixture_names()) {
    const auto f = fixture(name);
    const auto [nodes, edges] = write_fixture(f, dir);
    const auto g = load_graph(nodes.string(), edges.string());
    CHECK(graph_to_json(g) == graph_to_json(f.graph()));
  }
  CHECK(code_of([] { fixture("fig99"); }) == ErrorCode::UnknownFixture);
  fs::remove_all(dir);
}

TEST_CASE("rating conversion") {
  CHECK(harm_from_rating(100.0, NumericScale{0, 100, true}).value() == 0.0);
  CHECK(harm_from_rating(37.5, NumericScale{0, 100, true}).value() == doctest::Approx(62.5));
  CHECK(harm_from_rating(37.5, NumericScale{0, 100, false}).value() == doctest::Approx(37.5));
  CHECK(harm_from_rating(3.0, NumericScale{1, 5, false}).value() == doctest::Approx(50));
  const auto msci = msci_grades();
  CHECK(harm_from_rating("AAA", msci).value() == 0.0);
  CHECK(harm_from_rating("BBB", msci).value() == doctest::Approx(50));
  CHECK(harm_from_rating("CCC", msci).value() == 100.0);
  CHECK(code_of([] { harm_from_rating(101.0, NumericScale{0, 100, true}); }) == ErrorCode::OutOfScale);
  CHECK(code_of([&] { harm_from_rating("D", msci); }) == ErrorCode::UnknownGrade);
}

TEST_CASE("indicator normalization") {
  const IndicatorSpec lower{"co2", false};
  const IndicatorSpec higher{"renewables", true};
  const EntityValues values{{"a", 10.0}, {"b", 20.0}, {"c", 40.0}, {"d", std::nullopt}};
  const auto out = normalize_indicator(values, lower);
  CHECK(*out.at("a") == doctest::Approx(0).epsilon(1e-9));
  CHECK(*out.at("b") == doctest::Approx(100.0 / 3).epsilon(1e-9));
  CHECK(*out.at("c") == doctest::Approx(100).epsilon(1e-9));
  CHECK_FALSE(out.at("d"));
  CHECK(*normalize_indicator(values, higher).at("c") == 0.0);
  CHECK(code_of([&] { normalize_indicator({{"a", 5.0}, {"b", 5.0}}, lower); }) == ErrorCode::DegenerateIndicator);
  CHECK(code_of([&] { normalize_indicator({{"a", 5.0}}, lower); }) == ErrorCode::DegenerateIndicator);
}

TEST_CASE("intrinsic harm from the worst indicators") {
  std::map<std::string, double> row{{"i1", 96}, {"i2", 90}, {"i3", 88}, {"i4", 10}, {"i5", 5}, {"i6", 0}};
  const std::vector<std::string> required{"i1", "i2", "i3", "i4", "i5", "i6"};
  CHECK(intrinsic_harm_topk_worst(row, required).value() == doctest::Approx(91.3333).epsilon(1e-4));
  std::map<std::string, double> flat;
  for (const auto& r : required) flat[r] = 50;
  CHECK(intrinsic_harm_topk_worst(flat, required).value() == doctest::Approx(50));
  row.erase("i4");
  CHECK(code_of([&] { intrinsic_harm_topk_worst(row, required); }) == ErrorCode::MissingIndicator);
}

TEST_CASE("intrinsic harms of the example indicator table") {
  const auto dir = scratch("toy");
  const auto paths = write_trade_toy(dir);
  const auto table = load_indicator_table(paths[1].string());
  const auto specs = load_indicator_specs(paths[2].string());
  const auto result = compute_intrinsic_harms(table, specs);
  const std::map<std::string, double> expected{{"BRA", 19.1667}, {"FRA", 39.1667}, {"ISL", 6.6667},
                                               {"KEN", 15.8333}, {"QAT", 100.0},  {"USA", 57.5}};
  REQUIRE(result.harms.size() == expected.size());
  for (const auto& [country, h] : expected) CHECK(result.harms.at(country) == doctest::Approx(h).epsilon(1e-5));
  CHECK(result.excluded == std::vector<std::string>{"MDG"});
  const auto partial = compute_intrinsic_harms(table, specs, 3, 3);
  CHECK(partial.harms.contains("MDG"));
  CHECK(partial.excluded.empty());
  fs::remove_all(dir);
}

TEST_CASE("trade network construction") {
  std::vector<TradeFlowRecord> records{{"AAA", "BBB", "s1", 2020, 60e6},
                                       {"AAA", "BBB", "s2", 2020, 50e6},
                                       {"BBB", "CCC", "s1", 2020, 100e6},
                                       {"CCC", "AAA", "s1", 2019, 500e6}};
  const auto skeleton = build_trade_network(records, 2020, 1e8);
  REQUIRE(skeleton.edges.size() == 1);
  CHECK(skeleton.edges[0].source == "AAA");
  CHECK(skeleton.edges[0].target == "BBB");
  CHECK(skeleton.countries == std::vector<std::string>{"AAA", "BBB", "CCC"});
  CHECK(build_trade_network({}, 2020, 1e8).edges.empty());

  CHECK(normalize_country("usa", {}) == "USA");
  CHECK(normalize_country("United States", {{"United States", "USA"}}) == "USA");
  CHECK_FALSE(normalize_country("United States", {}));

  std::istringstream bad("origin,dest,sector,year,value_usd\nUSA,Atlantis,s,2020,1\nNarnia,FRA,s,2020,1\n");
  try {
    load_trade_flows(bad);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnmappedEntity);
    CHECK(std::string(e.what()).find("Atlantis, Narnia") != std::string::npos);
  }
  std::istringstream negative("origin,dest,sector,year,value_usd\nUSA,FRA,s,2020,-1\n");
  CHECK(code_of([&] { load_trade_flows(negative); }) == ErrorCode::ConstraintViolation);
}

TEST_CASE("pruning") {
  const std::map<std::string, double> harms{{"a", 10}, {"b", 20}, {"c", 30}, {"d", 40}};
  TradeSkeleton chain{{"a", "b", "c"}, {{"a", "b"}, {"b", "c"}}};
  CHECK(prune_trade_network(chain, harms, PruneMode::Fixpoint).empty());
  const auto once = prune_trade_network(chain, harms, PruneMode::Once);
  CHECK(once.node_count() == 2);  // a goes; b lost its supplier only after the pass

  TradeSkeleton cycle{{"a", "b", "c"}, {{"a", "b"}, {"b", "c"}, {"c", "a"}}};
  CHECK(prune_trade_network(cycle, harms).node_count() == 3);
  CHECK(prune_trade_network(cycle, harms).edge_count() == 3);

  // a country without a harm is dropped first, which breaks the long cycle
  TradeSkeleton with_unknown{{"a", "b", "c", "x"}, {{"a", "b"}, {"b", "x"}, {"x", "a"}, {"c", "a"}, {"a", "c"}}};
  const auto pruned = prune_trade_network(with_unknown, harms);
  CHECK(edge_set(pruned) == std::set<std::pair<std::string, std::string>>{{"a", "b"}, {"a", "c"}, {"c", "a"}});
  TradeSkeleton lost_supplier{{"a", "b", "x"}, {{"x", "a"}, {"a", "b"}}};
  CHECK(prune_trade_network(lost_supplier, harms).empty());
  CHECK(parse_prune_mode("once") == PruneMode::Once);
  CHECK_FALSE(parse_prune_mode("twice"));
}

TEST_CASE("example trade pipeline keeps five countries") {
  const auto dir = scratch("trade");
  const auto paths = write_trade_toy(dir);
  const auto flows = load_trade_flows(paths[0].string());
  const auto skeleton = build_trade_network(flows, 2020, 1e8);
  const auto harms = compute_intrinsic_harms(load_indicator_table(paths[1].string()),
                                             load_indicator_specs(paths[2].string()));
  const auto g = prune_trade_network(skeleton, harms.harms);
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < g.node_count(); ++i) labels.push_back(g.label(NodeId{i}));
  CHECK(labels == std::vector<std::string>{"BRA", "FRA", "KEN", "QAT", "USA"});
  // QAT -> KEN carries exactly the threshold and is left out
  CHECK_FALSE(g.has_edge(g.require("QAT"), g.require("KEN")));
  CHECK(g.has_edge(g.require("QAT"), g.require("FRA")));
  fs::remove_all(dir);
}
