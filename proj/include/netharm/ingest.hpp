#pragma once

// File formats and the data preparation pipelines: node/edge tables, the
// JSON graph document, rating conversion, indicator normalization and the
// trade network construction.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netharm/graph.hpp"

namespace netharm {

// Maps alternative labels (company branches, country names) onto a
// canonical label. Entries are applied once; chains are not followed.
using AliasMap = std::map<std::string, std::string>;

// alias,canonical
AliasMap load_alias_map(const std::string& path);

// nodes: label,harm[,name]   edges: src,dst
// With aliases, rows whose label is an alias are dropped (the canonical row
// supplies the harm), edge endpoints are rewritten, and edges that collapse
// into self-loops or duplicates are dropped.
// Errors: ParseError (line/column precise), ConstraintViolation.
HarmGraph load_graph(const std::string& node_path, const std::string& edge_path,
                     const AliasMap& aliases = {});
HarmGraph load_graph(std::istream& nodes, std::istream& edges, const AliasMap& aliases = {},
                     const std::string& node_source = "nodes", const std::string& edge_source = "edges");

void write_node_table(const HarmGraph& g, std::ostream& out);
void write_edge_table(const HarmGraph& g, std::ostream& out);

// {"nodes":[{"id","label","harm"[,"name"]}], "edges":[[src_id, dst_id]]}
nlohmann::json graph_to_json(const HarmGraph& g);
HarmGraph graph_from_json(const nlohmann::json& doc);

// Formats a value with six decimals, the precision of every tabular output.
std::string format_fixed(double value, int decimals = 6);

struct NumericScale {
  double min = 0.0;
  double max = 100.0;
  bool higher_is_better = true;
};

// Grades ordered best first, e.g. AAA ... CCC.
struct GradedScale {
  std::vector<std::string> grades;
};

GradedScale msci_grades();

// Linear map onto [0, 100], inverted when higher ratings are better.
// Throws OutOfScale.
HarmScore harm_from_rating(double score, const NumericScale& scale);
// Equal-width bins: best grade -> 0, worst -> 100. Throws UnknownGrade.
HarmScore harm_from_rating(const std::string& grade, const GradedScale& scale);

struct IndicatorSpec {
  std::string name;
  bool higher_is_better = false;
};

// entity -> indicator -> value; absent entries are missing.
struct IndicatorTable {
  std::map<std::string, std::map<std::string, double>> values;
};

// entity,indicator,value (empty value = missing)
IndicatorTable load_indicator_table(const std::string& path, const AliasMap& aliases = {});
// indicator,higher_is_better
std::vector<IndicatorSpec> load_indicator_specs(const std::string& path);

using EntityValues = std::map<std::string, std::optional<double>>;

// 100 (x - min) / (max - min) over the present values, inverted with
// higher_is_better. Throws DegenerateIndicator when fewer than two distinct
// values are present.
EntityValues normalize_indicator(const EntityValues& values, const IndicatorSpec& spec);

// Mean of the k largest indicator harms in `row`. Every name in `required`
// must be present (MissingIndicator).
HarmScore intrinsic_harm_topk_worst(const std::map<std::string, double>& row,
                                    const std::vector<std::string>& required, int k = 3);

struct IntrinsicHarms {
  std::map<std::string, double> harms;
  std::vector<std::string> excluded;  // entities dropped for missing data
};

// Normalizes every configured indicator and averages each entity's k worst.
// By default only complete rows are scored; with `allow_partial = p`,
// entities with at least p indicators are scored on what they have.
IntrinsicHarms compute_intrinsic_harms(const IndicatorTable& table, const std::vector<IndicatorSpec>& specs,
                                       int k = 3, std::optional<int> allow_partial = std::nullopt);

struct TradeFlowRecord {
  std::string origin;
  std::string destination;
  std::string sector;
  int year = 0;
  double value_usd = 0.0;
};

// Upper-cases and aliases a country label; nullopt unless the result is an
// ISO-3 style code (three letters A-Z).
std::optional<std::string> normalize_country(const std::string& label, const AliasMap& aliases);

// origin,dest,sector,year,value_usd. Unmapped country labels are collected
// and reported together (UnmappedEntity).
std::vector<TradeFlowRecord> load_trade_flows(const std::string& path, const AliasMap& aliases = {});
std::vector<TradeFlowRecord> load_trade_flows(std::istream& in, const AliasMap& aliases = {},
                                              const std::string& source = "flows");

struct TradeSkeleton {
  std::vector<std::string> countries;  // sorted
  std::vector<EdgeSpec> edges;         // sorted by (source, target)
};

// Sums flows per ordered pair over all sectors of `year`; an edge a -> b
// exists iff the sum strictly exceeds `threshold_usd`.
TradeSkeleton build_trade_network(const std::vector<TradeFlowRecord>& records, int year, double threshold_usd);

enum class PruneMode { Once, Fixpoint };

std::optional<PruneMode> parse_prune_mode(std::string_view text);
std::string_view to_string(PruneMode mode) noexcept;

// Drops countries without a harm, then countries with no incoming edge,
// then isolated countries. Fixpoint repeats the last two steps until
// nothing changes.
HarmGraph prune_trade_network(const TradeSkeleton& skeleton, const std::map<std::string, double>& harms,
                              PruneMode mode = PruneMode::Fixpoint);

}  // namespace netharm
