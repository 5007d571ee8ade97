#pragma once

#include <optional>

#include "netharm/fixtures.hpp"
#include "netharm/metrics.hpp"

namespace test {

inline netharm::HarmConfig config(netharm::Aggregator outer, netharm::Aggregator inner, double alpha,
                                  netharm::PathScheme scheme = netharm::PathScheme::AllShortestPaths,
                                  std::optional<int> m_max = std::nullopt) {
  netharm::HarmConfig cfg;
  cfg.outer = outer;
  cfg.inner = inner;
  cfg.alpha = alpha;
  cfg.scheme = scheme;
  cfg.m_max = m_max;
  return cfg;
}

inline double harm_of(const std::string& fixture_name, const netharm::HarmConfig& cfg) {
  const auto f = netharm::fixture(fixture_name);
  const auto g = f.graph();
  return netharm::network_harm(g, g.require(f.target), cfg);
}

}  // namespace test
