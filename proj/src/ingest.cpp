#include "netharm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "netharm/csv.hpp"
#include "netharm/errors.hpp"

namespace netharm {

namespace {

[[noreturn]] void constraint(const csv::Table& table, const csv::Row& row, std::size_t index,
                             const std::string& reason) {
  const std::size_t column = index < row.fields.size() ? row.fields[index].column : 1;
  throw Error(ErrorCode::ConstraintViolation,
              table.source + ":" + std::to_string(row.line) + ":" + std::to_string(column) + ": " + reason);
}

std::string apply_alias(const std::string& label, const AliasMap& aliases) {
  auto it = aliases.find(label);
  return it == aliases.end() ? label : it->second;
}

HarmGraph load_graph_tables(const csv::Table& nodes, const csv::Table& edges, const AliasMap& aliases) {
  csv::expect_header(nodes, {"label", "harm"}, {"name"});
  csv::expect_header(edges, {"src", "dst"});

  std::vector<NodeSpec> node_specs;
  std::map<std::string, std::size_t> seen;
  std::vector<const csv::Row*> alias_rows;
  for (const auto& row : nodes.rows) {
    const auto& label = csv::field(nodes, row, 0).text;
    if (label.empty()) constraint(nodes, row, 0, "empty node label");
    const double harm = csv::parse_real(nodes, row, 1);
    if (!(harm >= HarmScore::kMin && harm <= HarmScore::kMax)) {
      constraint(nodes, row, 1, "harm " + csv::field(nodes, row, 1).text + " outside [0, 100]");
    }
    if (aliases.contains(label)) {
      alias_rows.push_back(&row);
      continue;
    }
    if (!seen.emplace(label, row.line).second) {
      constraint(nodes, row, 0, "duplicate node label '" + label + "' (first defined on line " +
                                    std::to_string(seen[label]) + ")");
    }
    std::string name = row.fields.size() > 2 ? row.fields[2].text : std::string();
    node_specs.push_back({label, HarmScore(harm), std::move(name)});
  }
  for (const auto* row : alias_rows) {
    const auto& canonical = aliases.at(row->fields[0].text);
    if (!seen.contains(canonical)) {
      constraint(nodes, *row, 0, "alias '" + row->fields[0].text + "' maps to '" + canonical +
                                     "', which has no node row");
    }
  }

  std::vector<EdgeSpec> edge_specs;
  std::set<std::pair<std::string, std::string>> edge_seen;
  for (const auto& row : edges.rows) {
    const auto src = apply_alias(csv::field(edges, row, 0).text, aliases);
    const auto dst = apply_alias(csv::field(edges, row, 1).text, aliases);
    if (!seen.contains(src)) constraint(edges, row, 0, "unknown source node '" + src + "'");
    if (!seen.contains(dst)) constraint(edges, row, 1, "unknown destination node '" + dst + "'");
    if (src == dst) {
      if (!aliases.empty() && (aliases.contains(row.fields[0].text) || aliases.contains(row.fields[1].text))) {
        continue;  // branches of the same entity trading with each other
      }
      constraint(edges, row, 0, "self-loop on '" + src + "'");
    }
    if (!edge_seen.emplace(src, dst).second) {
      if (!aliases.empty()) continue;
      constraint(edges, row, 0, "duplicate edge (" + src + ", " + dst + ")");
    }
    edge_specs.push_back({src, dst});
  }
  return build_graph(node_specs, edge_specs);
}

}  // namespace

AliasMap load_alias_map(const std::string& path) {
  const auto table = csv::read_file(path);
  csv::expect_header(table, {"alias", "canonical"});
  AliasMap aliases;
  for (const auto& row : table.rows) {
    const auto& alias = csv::field(table, row, 0).text;
    const auto& canonical = csv::field(table, row, 1).text;
    if (alias.empty() || canonical.empty()) constraint(table, row, 0, "empty alias entry");
    if (!aliases.emplace(alias, canonical).second) constraint(table, row, 0, "duplicate alias '" + alias + "'");
  }
  return aliases;
}

HarmGraph load_graph(const std::string& node_path, const std::string& edge_path, const AliasMap& aliases) {
  return load_graph_tables(csv::read_file(node_path), csv::read_file(edge_path), aliases);
}

HarmGraph load_graph(std::istream& nodes, std::istream& edges, const AliasMap& aliases,
                     const std::string& node_source, const std::string& edge_source) {
  return load_graph_tables(csv::parse(nodes, node_source), csv::parse(edges, edge_source), aliases);
}

std::string format_fixed(double value, int decimals) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(decimals) << value;
  auto text = out.str();
  // Avoid "-0.000000" for tiny negative rounding noise.
  if (text.starts_with('-') && text.find_first_not_of("-0.") == std::string::npos) text.erase(0, 1);
  return text;
}

void write_node_table(const HarmGraph& g, std::ostream& out) {
  bool any_name = false;
  for (std::uint32_t i = 0; i < g.node_count(); ++i) any_name |= !g.display_name(NodeId{i}).empty();
  out << (any_name ? "label,harm,name\n" : "label,harm\n");
  for (std::uint32_t i = 0; i < g.node_count(); ++i) {
    const NodeId id{i};
    std::ostringstream harm;
    harm << std::setprecision(17) << g.harm(id);
    out << csv::escape(g.label(id)) << ',' << harm.str();
    if (any_name) out << ',' << csv::escape(g.display_name(id));
    out << '\n';
  }
}

void write_edge_table(const HarmGraph& g, std::ostream& out) {
  out << "src,dst\n";
  for (const auto& e : g.edge_specs()) out << csv::escape(e.source) << ',' << csv::escape(e.target) << '\n';
}

nlohmann::json graph_to_json(const HarmGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::uint32_t i = 0; i < g.node_count(); ++i) {
    const NodeId id{i};
    nlohmann::json node{{"id", i}, {"label", g.label(id)}, {"harm", g.harm(id)}};
    if (!g.display_name(id).empty()) node["name"] = g.display_name(id);
    nodes.push_back(std::move(node));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u.index, v.index});
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

HarmGraph graph_from_json(const nlohmann::json& doc) {
  auto invalid = [](const std::string& what) { return Error(ErrorCode::ConstraintViolation, "graph document: " + what); };
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges") || !doc["nodes"].is_array() ||
      !doc["edges"].is_array()) {
    throw invalid("expected an object with 'nodes' and 'edges' arrays");
  }
  std::vector<NodeSpec> nodes;
  std::map<std::int64_t, std::string> labels;
  for (const auto& node : doc["nodes"]) {
    if (!node.is_object() || !node.contains("id") || !node["id"].is_number_integer() || !node.contains("label") ||
        !node["label"].is_string() || !node.contains("harm") || !node["harm"].is_number()) {
      throw invalid("every node needs integer 'id', string 'label' and numeric 'harm'");
    }
    const auto id = node["id"].get<std::int64_t>();
    if (!labels.emplace(id, node["label"].get<std::string>()).second) {
      throw invalid("duplicate node id " + std::to_string(id));
    }
    nodes.push_back({node["label"].get<std::string>(), HarmScore(node["harm"].get<double>()),
                     node.value("name", std::string())});
  }
  std::vector<EdgeSpec> edges;
  for (const auto& edge : doc["edges"]) {
    if (!edge.is_array() || edge.size() != 2 || !edge[0].is_number_integer() || !edge[1].is_number_integer()) {
      throw invalid("every edge must be a [src, dst] pair of node ids");
    }
    const auto src = labels.find(edge[0].get<std::int64_t>());
    const auto dst = labels.find(edge[1].get<std::int64_t>());
    if (src == labels.end() || dst == labels.end()) throw invalid("edge references an unknown node id");
    edges.push_back({src->second, dst->second});
  }
  return build_graph(nodes, edges);
}

GradedScale msci_grades() { return {{"AAA", "AA", "A", "BBB", "BB", "B", "CCC"}}; }

HarmScore harm_from_rating(double score, const NumericScale& scale) {
  if (!(scale.max > scale.min)) throw Error(ErrorCode::OutOfScale, "rating scale has max <= min");
  if (!(score >= scale.min && score <= scale.max)) {
    std::ostringstream msg;
    msg << "rating " << score << " outside scale [" << scale.min << ", " << scale.max << "]";
    throw Error(ErrorCode::OutOfScale, msg.str());
  }
  const double position = 100.0 * (score - scale.min) / (scale.max - scale.min);
  return HarmScore(scale.higher_is_better ? 100.0 - position : position);
}

HarmScore harm_from_rating(const std::string& grade, const GradedScale& scale) {
  const auto it = std::find(scale.grades.begin(), scale.grades.end(), grade);
  if (it == scale.grades.end()) throw Error(ErrorCode::UnknownGrade, "unknown grade '" + grade + "'");
  if (scale.grades.size() == 1) return HarmScore(0.0);
  const auto index = static_cast<double>(it - scale.grades.begin());
  return HarmScore(100.0 * index / static_cast<double>(scale.grades.size() - 1));
}

IndicatorTable load_indicator_table(const std::string& path, const AliasMap& aliases) {
  const auto table = csv::read_file(path);
  csv::expect_header(table, {"entity", "indicator", "value"});
  IndicatorTable out;
  for (const auto& row : table.rows) {
    const auto entity = apply_alias(csv::field(table, row, 0).text, aliases);
    const auto& indicator = csv::field(table, row, 1).text;
    if (entity.empty()) constraint(table, row, 0, "empty entity label");
    if (indicator.empty()) constraint(table, row, 1, "empty indicator name");
    auto& entity_row = out.values[entity];
    if (row.fields.size() < 3 || row.fields[2].text.empty()) continue;  // missing value
    const double value = csv::parse_real(table, row, 2);
    if (!entity_row.emplace(indicator, value).second) {
      constraint(table, row, 1, "duplicate value for (" + entity + ", " + indicator + ")");
    }
  }
  if (out.values.empty()) throw Error(ErrorCode::ConstraintViolation, path + ": no entities");
  return out;
}

std::vector<IndicatorSpec> load_indicator_specs(const std::string& path) {
  const auto table = csv::read_file(path);
  csv::expect_header(table, {"indicator", "higher_is_better"});
  std::vector<IndicatorSpec> specs;
  std::set<std::string> names;
  for (const auto& row : table.rows) {
    IndicatorSpec spec{csv::field(table, row, 0).text, csv::parse_bool(table, row, 1)};
    if (spec.name.empty()) constraint(table, row, 0, "empty indicator name");
    if (!names.insert(spec.name).second) constraint(table, row, 0, "duplicate indicator '" + spec.name + "'");
    specs.push_back(std::move(spec));
  }
  return specs;
}

EntityValues normalize_indicator(const EntityValues& values, const IndicatorSpec& spec) {
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const auto& [entity, value] : values) {
    if (!value) continue;
    if (!std::isfinite(*value)) {
      throw Error(ErrorCode::ConstraintViolation, "non-finite value for '" + entity + "' in " + spec.name);
    }
    lo = first ? *value : std::min(lo, *value);
    hi = first ? *value : std::max(hi, *value);
    first = false;
  }
  if (first || !(hi > lo)) {
    throw Error(ErrorCode::DegenerateIndicator, "indicator '" + spec.name + "' needs two distinct values");
  }
  EntityValues out;
  for (const auto& [entity, value] : values) {
    if (!value) {
      out.emplace(entity, std::nullopt);
      continue;
    }
    const double scaled = 100.0 * (*value - lo) / (hi - lo);
    out.emplace(entity, spec.higher_is_better ? 100.0 - scaled : scaled);
  }
  return out;
}

namespace {

double mean_of_largest(std::vector<double> values, int k) {
  const auto take = std::min<std::size_t>(values.size(), static_cast<std::size_t>(k));
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(take), values.end(),
                    std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) sum += values[i];
  return sum / static_cast<double>(take);
}

}  // namespace

HarmScore intrinsic_harm_topk_worst(const std::map<std::string, double>& row,
                                    const std::vector<std::string>& required, int k) {
  if (k < 1) throw Error(ErrorCode::ConstraintViolation, "k must be >= 1");
  std::vector<double> values;
  for (const auto& name : required) {
    auto it = row.find(name);
    if (it == row.end()) throw Error(ErrorCode::MissingIndicator, "missing indicator '" + name + "'");
    values.push_back(it->second);
  }
  if (values.empty()) throw Error(ErrorCode::MissingIndicator, "no indicators configured");
  return HarmScore(std::clamp(mean_of_largest(std::move(values), k), HarmScore::kMin, HarmScore::kMax));
}

IntrinsicHarms compute_intrinsic_harms(const IndicatorTable& table, const std::vector<IndicatorSpec>& specs,
                                       int k, std::optional<int> allow_partial) {
  std::map<std::string, std::map<std::string, double>> normalized;
  for (const auto& spec : specs) {
    EntityValues raw;
    for (const auto& [entity, row] : table.values) {
      auto it = row.find(spec.name);
      raw.emplace(entity, it == row.end() ? std::nullopt : std::optional<double>(it->second));
    }
    for (const auto& [entity, value] : normalize_indicator(raw, spec)) {
      if (value) normalized[entity][spec.name] = *value;
    }
  }

  std::vector<std::string> required;
  for (const auto& spec : specs) required.push_back(spec.name);

  IntrinsicHarms out;
  for (const auto& [entity, row] : table.values) {
    auto it = normalized.find(entity);
    const std::size_t present = it == normalized.end() ? 0 : it->second.size();
    if (present == required.size()) {
      out.harms.emplace(entity, intrinsic_harm_topk_worst(it->second, required, k).value());
    } else if (allow_partial && present > 0 && present >= static_cast<std::size_t>(*allow_partial)) {
      std::vector<double> values;
      for (const auto& [name, v] : it->second) values.push_back(v);
      out.harms.emplace(entity, mean_of_largest(std::move(values), k));
    } else {
      out.excluded.push_back(entity);
    }
  }
  return out;
}

std::optional<std::string> normalize_country(const std::string& label, const AliasMap& aliases) {
  std::string code = apply_alias(label, aliases);
  std::transform(code.begin(), code.end(), code.begin(), [](unsigned char c) { return std::toupper(c); });
  if (code.size() != 3 || !std::all_of(code.begin(), code.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
    return std::nullopt;
  }
  return code;
}

std::vector<TradeFlowRecord> load_trade_flows(const std::string& path, const AliasMap& aliases) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, 0, "cannot open file");
  return load_trade_flows(in, aliases, path);
}

std::vector<TradeFlowRecord> load_trade_flows(std::istream& in, const AliasMap& aliases, const std::string& source) {
  const auto table = csv::parse(in, source);
  csv::expect_header(table, {"origin", "dest", "sector", "year", "value_usd"});
  std::vector<TradeFlowRecord> records;
  std::set<std::string> unmapped;
  for (const auto& row : table.rows) {
    TradeFlowRecord r;
    const auto origin = normalize_country(csv::field(table, row, 0).text, aliases);
    const auto dest = normalize_country(csv::field(table, row, 1).text, aliases);
    if (!origin) unmapped.insert(row.fields[0].text);
    if (!dest) unmapped.insert(row.fields[1].text);
    r.sector = csv::field(table, row, 2).text;
    r.year = static_cast<int>(csv::parse_integer(table, row, 3));
    r.value_usd = csv::parse_real(table, row, 4);
    if (r.value_usd < 0.0) constraint(table, row, 4, "negative trade value");
    if (!origin || !dest) continue;
    if (*origin == *dest) constraint(table, row, 1, "origin equals destination (" + *origin + ")");
    r.origin = *origin;
    r.destination = *dest;
    records.push_back(std::move(r));
  }
  if (!unmapped.empty()) {
    std::string list;
    for (const auto& label : unmapped) list += (list.empty() ? "" : ", ") + label;
    throw Error(ErrorCode::UnmappedEntity,
                source + ": " + std::to_string(unmapped.size()) + " country label(s) without an ISO-3 code: " + list);
  }
  return records;
}

TradeSkeleton build_trade_network(const std::vector<TradeFlowRecord>& records, int year, double threshold_usd) {
  std::map<std::pair<std::string, std::string>, double> totals;
  std::set<std::string> countries;
  for (const auto& r : records) {
    if (r.year != year) continue;
    countries.insert(r.origin);
    countries.insert(r.destination);
    totals[{r.origin, r.destination}] += r.value_usd;
  }
  TradeSkeleton skeleton;
  skeleton.countries.assign(countries.begin(), countries.end());
  for (const auto& [pair, total] : totals) {
    if (total > threshold_usd) skeleton.edges.push_back({pair.first, pair.second});
  }
  return skeleton;
}

std::optional<PruneMode> parse_prune_mode(std::string_view text) {
  if (text == "once") return PruneMode::Once;
  if (text == "fixpoint") return PruneMode::Fixpoint;
  return std::nullopt;
}

std::string_view to_string(PruneMode mode) noexcept { return mode == PruneMode::Once ? "once" : "fixpoint"; }

HarmGraph prune_trade_network(const TradeSkeleton& skeleton, const std::map<std::string, double>& harms,
                              PruneMode mode) {
  std::set<std::string> alive;
  for (const auto& c : skeleton.countries) {
    if (harms.contains(c)) alive.insert(c);
  }
  auto live_edges = [&] {
    std::vector<const EdgeSpec*> edges;
    for (const auto& e : skeleton.edges) {
      if (alive.contains(e.source) && alive.contains(e.target)) edges.push_back(&e);
    }
    return edges;
  };

  while (true) {
    const auto before = alive.size();
    std::set<std::string> has_incoming;
    for (const auto* e : live_edges()) has_incoming.insert(e->target);
    std::erase_if(alive, [&](const std::string& c) { return !has_incoming.contains(c); });

    std::set<std::string> touched;
    for (const auto* e : live_edges()) {
      touched.insert(e->source);
      touched.insert(e->target);
    }
    std::erase_if(alive, [&](const std::string& c) { return !touched.contains(c); });
    if (mode == PruneMode::Once || alive.size() == before) break;
  }

  std::vector<NodeSpec> nodes;
  for (const auto& c : alive) nodes.push_back({c, HarmScore(harms.at(c)), {}});
  std::vector<EdgeSpec> edges;
  for (const auto* e : live_edges()) edges.push_back(*e);
  return build_graph(nodes, edges);
}

}  // namespace netharm
