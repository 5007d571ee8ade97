#pragma once

// Built-in example networks used by tests, the CLI and the documentation.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "netharm/graph.hpp"

namespace netharm {

struct Fixture {
  std::string name;
  std::string description;
  std::string target;  // label of the node of interest
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;

  HarmGraph graph() const { return build_graph(nodes, edges); }
};

// Graph fixtures, in the order listed by the CLI.
const std::vector<std::string>& fixture_names();

// Throws UnknownFixture.
Fixture fixture(std::string_view name);

// Writes <dir>/<name>.nodes.csv and <dir>/<name>.edges.csv with a comment
// header naming the fixture and its target. Returns the two paths.
std::pair<std::filesystem::path, std::filesystem::path> write_fixture(const Fixture& f,
                                                                      const std::filesystem::path& dir);

// Inputs of the small trade pipeline example: flows.csv, indicators.csv,
// indicator_spec.csv. Returns the written paths in that order.
std::vector<std::filesystem::path> write_trade_toy(const std::filesystem::path& dir);

}  // namespace netharm
