#include "netharm/fixtures.hpp"

#include <fstream>

#include "netharm/csv.hpp"
#include "netharm/errors.hpp"
#include "netharm/ingest.hpp"

namespace netharm {

namespace {

NodeSpec node(std::string label, double harm) { return {std::move(label), HarmScore(harm), {}}; }

// Two-level tree feeding the target: level one {85, 10}, level two
// {75, 60, 60, 50}.
Fixture tree_network() {
  return {"fig5a",
          "tree-shaped supply network",
          "target",
          {node("target", 0), node("n85", 85), node("n10", 10), node("n75", 75), node("n60a", 60),
           node("n60b", 60), node("n50", 50)},
          {{"n85", "target"},
           {"n10", "target"},
           {"n75", "n85"},
           {"n60a", "n85"},
           {"n60b", "n10"},
           {"n50", "n10"}}};
}

// The tree plus two base suppliers and a direct n75 -> target link: n100
// reaches the target along two shortest paths, n75 along paths of length 1
// and 2.
Fixture deeper_network() {
  auto f = tree_network();
  f.name = "fig5b";
  f.description = "tree with two base suppliers and a shortcut from n75 to the target";
  f.nodes.push_back(node("n100", 100));
  f.nodes.push_back(node("n50b", 50));
  f.edges.push_back({"n75", "target"});
  f.edges.push_back({"n100", "n60b"});
  f.edges.push_back({"n100", "n50"});
  f.edges.push_back({"n50b", "n60a"});
  return f;
}

// Adds n85 -> n75, closing the loop n75 <-> n85. The only simple path of
// length 4 is n50b -> n60a -> n85 -> n75 -> target.
Fixture looped_network() {
  auto f = deeper_network();
  f.name = "fig5c";
  f.description = "fig5b with a loop between n85 and n75";
  f.edges.push_back({"n85", "n75"});
  return f;
}

Fixture max_blind_spot() {
  return {"fig3a",
          "max aggregation: a and b have equal upstream harm although only b's suppliers are all bad",
          "a",
          {node("a", 0), node("b", 0), node("p100", 100), node("p0a", 0), node("p0b", 0), node("q100", 100),
           node("q90", 90), node("q80", 80)},
          {{"p100", "a"}, {"p0a", "a"}, {"p0b", "a"}, {"q100", "b"}, {"q90", "b"}, {"q80", "b"}}};
}

Fixture average_compensation() {
  return {"fig3b",
          "average aggregation: one bad supplier offset by a perfect one",
          "a",
          {node("a", 0), node("b", 0), node("p100", 100), node("p0", 0), node("q50a", 50), node("q50b", 50)},
          {{"p100", "a"}, {"p0", "a"}, {"q50a", "b"}, {"q50b", "b"}}};
}

// Three supplier tiers with lateral links. The 90 supplier sits two steps
// away behind the central m50, the 100 supplier three steps away. The
// longest simple path, n60 n70 n40 n10 m20 m55 m50 target, has length 7.
Fixture toy_supply_network() {
  return {"fig6",
          "three-tier toy supply network with lateral links",
          "target",
          {node("target", 0), node("m50", 50), node("m55", 55), node("m20", 20), node("n90", 90), node("n30", 30),
           node("n40", 40), node("n10", 10), node("n100", 100), node("n70", 70), node("n60", 60)},
          {{"m50", "target"},
           {"m55", "target"},
           {"m20", "target"},
           {"n90", "m50"},
           {"n30", "m50"},
           {"n40", "m55"},
           {"n10", "m20"},
           {"n100", "n30"},
           {"n70", "n40"},
           {"n60", "n10"},
           {"m20", "m55"},
           {"m55", "m50"},
           {"n40", "n10"},
           {"n40", "n30"},
           {"n60", "n70"}}};
}

Fixture chain() {
  return {"chain", "three-node chain c -> b -> a", "a", {node("a", 0), node("b", 0), node("c", 100)},
          {{"c", "b"}, {"b", "a"}}};
}

Fixture cycle() {
  return {"cycle", "directed 3-cycle a -> g -> d -> a", "a", {node("a", 0), node("g", 40), node("d", 80)},
          {{"a", "g"}, {"g", "d"}, {"d", "a"}}};
}

Fixture star() {
  Fixture f{"star", "five perfect suppliers around a hub", "hub", {node("hub", 0)}, {}};
  for (const char* leaf : {"l1", "l2", "l3", "l4", "l5"}) {
    f.nodes.push_back(node(leaf, 0));
    f.edges.push_back({leaf, "hub"});
  }
  return f;
}

Fixture pair() {
  return {"pair", "single supplier b -> a", "a", {node("a", 0), node("b", 100)}, {{"b", "a"}}};
}

}  // namespace

const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"fig3a", "fig3b", "fig5a", "fig5b", "fig5c",
                                              "fig6",  "chain", "cycle", "star",  "pair"};
  return names;
}

Fixture fixture(std::string_view name) {
  if (name == "fig3a") return max_blind_spot();
  if (name == "fig3b") return average_compensation();
  if (name == "fig5a") return tree_network();
  if (name == "fig5b") return deeper_network();
  if (name == "fig5c") return looped_network();
  if (name == "fig6") return toy_supply_network();
  if (name == "chain") return chain();
  if (name == "cycle") return cycle();
  if (name == "star") return star();
  if (name == "pair") return pair();
  throw Error(ErrorCode::UnknownFixture, "unknown fixture '" + std::string(name) + "'");
}

std::pair<std::filesystem::path, std::filesystem::path> write_fixture(const Fixture& f,
                                                                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto nodes_path = dir / (f.name + ".nodes.csv");
  const auto edges_path = dir / (f.name + ".edges.csv");
  const auto g = f.graph();
  const std::string header = "# fixture: " + f.name + "\n# target: " + f.target + "\n# " + f.description + "\n";
  {
    std::ofstream out(nodes_path);
    out << header;
    write_node_table(g, out);
  }
  {
    std::ofstream out(edges_path);
    out << header;
    write_edge_table(g, out);
  }
  return {nodes_path, edges_path};
}

std::vector<std::filesystem::path> write_trade_toy(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> files{
      {"flows.csv",
       "# toy bilateral trade flows in USD\n"
       "origin,dest,sector,year,value_usd\n"
       "USA,BRA,machinery,2020,5000000000\n"
       "BRA,USA,agriculture,2020,3000000000\n"
       "FRA,USA,chemicals,2020,2000000000\n"
       "USA,FRA,machinery,2020,1000000000\n"
       "QAT,FRA,energy,2020,60000000\n"
       "QAT,FRA,chemicals,2020,50000000\n"
       "QAT,KEN,energy,2020,100000000\n"
       "QAT,USA,energy,2020,400000000\n"
       "FRA,QAT,machinery,2020,300000000\n"
       "KEN,FRA,agriculture,2020,200000000\n"
       "BRA,KEN,agriculture,2020,300000000\n"
       "USA,KEN,machinery,2020,500000000\n"
       "ISL,FRA,fish,2020,500000000\n"
       "MDG,KEN,agriculture,2020,200000000\n"
       "KEN,MDG,machinery,2020,150000000\n"
       "KEN,QAT,agriculture,2019,500000000\n"},
      {"indicators.csv",
       "entity,indicator,value\n"
       "KEN,co2,0\nKEN,water_stress,10\nKEN,renewables,72\nKEN,pm25,25\n"
       "BRA,co2,2\nBRA,water_stress,0\nBRA,renewables,48\nBRA,pm25,15\n"
       "FRA,co2,5\nFRA,water_stress,20\nFRA,renewables,16\nFRA,pm25,11\n"
       "USA,co2,15\nUSA,water_stress,40\nUSA,renewables,12\nUSA,pm25,9\n"
       "QAT,co2,40\nQAT,water_stress,80\nQAT,renewables,0\nQAT,pm25,85\n"
       "ISL,co2,6\nISL,water_stress,4\nISL,renewables,80\nISL,pm25,5\n"
       "MDG,co2,0.2\nMDG,water_stress,8\nMDG,renewables,70\nMDG,pm25,\n"},
      {"indicator_spec.csv",
       "indicator,higher_is_better\n"
       "co2,false\nwater_stress,false\nrenewables,true\npm25,false\n"},
  };
  std::vector<std::filesystem::path> paths;
  for (const auto& [name, content] : files) {
    const auto path = dir / name;
    std::ofstream(path) << content;
    paths.push_back(path);
  }
  return paths;
}

}  // namespace netharm
