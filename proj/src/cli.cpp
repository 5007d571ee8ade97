#include "netharm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "netharm/csv.hpp"
#include "netharm/errors.hpp"
#include "netharm/fixtures.hpp"
#include "netharm/ingest.hpp"
#include "netharm/metrics.hpp"
#include "netharm/service.hpp"
#include "netharm/whatif.hpp"

namespace netharm::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

[[noreturn]] void bad_choice(const std::string& flag, const std::string& value,
                             const std::vector<std::string>& choices) {
  std::string best;
  // Close matches only; a typo in a prefix of a long choice also counts.
  std::size_t best_distance = std::max<std::size_t>(2, value.size() / 2) + 1;
  for (const auto& c : choices) {
    const auto d = std::min(edit_distance(value, c), edit_distance(value, c.substr(0, value.size())) + 1);
    if (d < best_distance) {
      best_distance = d;
      best = c;
    }
  }
  std::string msg = flag + ": unknown value '" + value + "'";
  if (!best.empty()) msg += "; did you mean '" + best + "'?";
  msg += " (choices:";
  for (const auto& c : choices) msg += " " + c;
  throw UsageError(msg + ")");
}

struct GraphInput {
  std::string nodes;
  std::string edges;
  std::string graph_json;
  std::string fixture;
  std::string aliases;
};

void add_graph_options(CLI::App* cmd, GraphInput& in) {
  cmd->add_option("--nodes", in.nodes, "node table (label,harm[,name])");
  cmd->add_option("--edges", in.edges, "edge table (src,dst)");
  cmd->add_option("--graph", in.graph_json, "JSON graph document");
  cmd->add_option("--fixture", in.fixture, "built-in fixture name");
  cmd->add_option("--aliases", in.aliases, "alias table (alias,canonical)");
}

HarmGraph load_input(const GraphInput& in) {
  const int sources = !in.nodes.empty() + !in.graph_json.empty() + !in.fixture.empty();
  if (sources != 1) throw UsageError("give exactly one of --nodes/--edges, --graph or --fixture");
  if (!in.nodes.empty()) {
    if (in.edges.empty()) throw UsageError("--nodes needs --edges");
    const AliasMap aliases = in.aliases.empty() ? AliasMap{} : load_alias_map(in.aliases);
    return load_graph(in.nodes, in.edges, aliases);
  }
  if (!in.edges.empty()) throw UsageError("--edges needs --nodes");
  if (!in.graph_json.empty()) {
    std::ifstream file(in.graph_json);
    if (!file) throw Error(ErrorCode::ParseError, in.graph_json + ": cannot open");
    json doc;
    try {
      doc = json::parse(file);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, in.graph_json + ": " + e.what());
    }
    return graph_from_json(doc);
  }
  return fixture(in.fixture).graph();
}

json input_paths(const GraphInput& in) {
  json paths = json::object();
  if (!in.nodes.empty()) paths["nodes"] = in.nodes;
  if (!in.edges.empty()) paths["edges"] = in.edges;
  if (!in.graph_json.empty()) paths["graph"] = in.graph_json;
  if (!in.fixture.empty()) paths["fixture"] = in.fixture;
  if (!in.aliases.empty()) paths["aliases"] = in.aliases;
  return paths;
}

struct ConfigFlags {
  std::string inner = "avg";
  std::string outer = "max";
  double alpha = 0.85;
  std::string mmax = "auto";
  std::string scheme = "shortest-all";
  std::string direction = "upstream";
};

void add_config_options(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--inner", f.inner, "within-level aggregator: max, avg, sum, top-<k>")->capture_default_str();
  cmd->add_option("--outer", f.outer, "across-level aggregator: max, avg, sum, top-<k>")->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "per-level damping in (0, 1]")->capture_default_str();
  cmd->add_option("--mmax", f.mmax, "maximum path length, or auto")->capture_default_str();
  cmd->add_option("--scheme", f.scheme, "all, simple, shortest-all, shortest-single")->capture_default_str();
  cmd->add_option("--direction", f.direction, "upstream or downstream")->capture_default_str();
}

Aggregator to_aggregator(const std::string& flag, const std::string& text) {
  if (auto agg = Aggregator::parse(text)) return *agg;
  bad_choice(flag, text, {"max", "avg", "sum", "top-50"});
}

HarmConfig to_config(const ConfigFlags& f) {
  HarmConfig cfg;
  cfg.inner = to_aggregator("--inner", f.inner);
  cfg.outer = to_aggregator("--outer", f.outer);
  if (!(f.alpha > 0.0 && f.alpha <= 1.0)) throw UsageError("--alpha: must be in (0, 1]");
  cfg.alpha = f.alpha;
  if (f.mmax != "auto") {
    int m = 0;
    const auto* end = f.mmax.data() + f.mmax.size();
    auto [ptr, ec] = std::from_chars(f.mmax.data(), end, m);
    if (ec != std::errc{} || ptr != end || m < 1) throw UsageError("--mmax: expected a positive integer or auto");
    cfg.m_max = m;
  }
  auto scheme = parse_scheme(f.scheme);
  if (!scheme) bad_choice("--scheme", f.scheme, {"all", "simple", "shortest-all", "shortest-single"});
  cfg.scheme = *scheme;
  auto dir = parse_direction(f.direction);
  if (!dir) bad_choice("--direction", f.direction, {"upstream", "downstream"});
  cfg.direction = *dir;
  return cfg;
}

json config_json(const HarmConfig& cfg) {
  return {{"inner", cfg.inner.name()},
          {"outer", cfg.outer.name()},
          {"alpha", cfg.alpha},
          {"mmax", cfg.m_max ? json(*cfg.m_max) : json("auto")},
          {"scheme", std::string(to_string(cfg.scheme))},
          {"direction", std::string(to_string(cfg.direction))}};
}

struct Format {
  std::string name = "table";

  bool json() const { return name == "json"; }
};

void add_format_option(CLI::App* cmd, Format& f) {
  cmd->add_option("--format", f.name, "table or json")->capture_default_str();
}

void check_format(const Format& f) {
  if (f.name != "table" && f.name != "json") bad_choice("--format", f.name, {"table", "json"});
}

// Everything needed to reproduce an output: the exact arguments plus the
// resolved configuration, inputs and tool version.
struct Manifest {
  json doc;

  std::string comment() const { return "# manifest: " + doc.dump() + "\n"; }
};

Manifest make_manifest(const std::vector<std::string>& args, const std::string& command, json inputs,
                       const std::string& output, std::optional<HarmConfig> cfg = std::nullopt,
                       std::optional<std::uint64_t> seed = std::nullopt) {
  json doc{{"tool", "netharm"},
           {"version", NETHARM_VERSION},
           {"command", command},
           {"args", args},
           {"inputs", std::move(inputs)},
           {"output", output}};
  if (cfg) doc["config"] = config_json(*cfg);
  if (seed) doc["seed"] = *seed;
  return {doc};
}

// Writes to --output when given, otherwise to the command's stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path), fallback_(fallback) {}
  ~Sink() {
    if (!path_.empty() && path_ != "-") {
      std::ofstream file(path_, std::ios::binary);
      file << buffer_.str();
    } else {
      fallback_ << buffer_.str();
    }
  }
  std::ostream& stream() { return buffer_; }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ostringstream buffer_;
};

std::string output_name(const std::string& path) { return path.empty() ? "-" : path; }

std::string cell(const std::optional<double>& v) { return v ? format_fixed(*v) : ""; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json count_json(PathCount count) {
  if (count <= std::numeric_limits<std::uint64_t>::max()) return static_cast<std::uint64_t>(count);
  return to_string(count);
}

std::vector<NodeId> resolve_targets(const HarmGraph& g, const std::vector<std::string>& labels) {
  std::vector<NodeId> out;
  if (labels.empty()) {
    for (std::uint32_t i = 0; i < g.node_count(); ++i) out.push_back(NodeId{i});
    return out;
  }
  for (const auto& label : labels) out.push_back(g.require(label));
  return out;
}

// ---- score ----

struct ScoreArgs {
  GraphInput input;
  ConfigFlags config;
  Format format;
  std::vector<std::string> targets;
  bool verify = false;
  double tolerance = 1e-6;
  std::string output;
};

int cmd_score(const ScoreArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  check_format(a.format);
  const auto cfg = to_config(a.config);
  if (a.verify && (cfg.scheme != PathScheme::AllPaths || cfg.inner != Aggregator::sum() ||
                   cfg.outer != Aggregator::sum())) {
    throw UsageError("--verify-reduction needs --scheme all --inner sum --outer sum");
  }
  const auto g = load_input(a.input);
  const auto targets = resolve_targets(g, a.targets);
  std::vector<HarmBreakdown> results;
  for (NodeId t : targets) results.push_back(evaluate_network_harm(g, t, cfg));

  std::optional<ReductionReport> reduction;
  if (a.verify) {
    const int m = cfg.m_max ? *cfg.m_max : reduction_depth(g, cfg.alpha);
    reduction = verify_reduction(g, cfg.alpha, m, a.tolerance);
  }

  const auto manifest = make_manifest(args, "score", input_paths(a.input), output_name(a.output), cfg);
  Sink sink(a.output, out);
  auto& s = sink.stream();
  if (a.format.json()) {
    json doc{{"manifest", manifest.doc}};
    json list = json::array();
    for (const auto& r : results) {
      json levels = json::array();
      for (const auto& lvl : r.levels) {
        levels.push_back({{"m", lvl.level},
                          {"size", count_json(lvl.size)},
                          {"distinct", lvl.distinct},
                          {"x", optional_json(lvl.value)},
                          {"weighted", optional_json(lvl.weighted)}});
      }
      list.push_back({{"target", g.label(r.target)}, {"H", r.harm}, {"m_max", r.m_max}, {"levels", levels}});
    }
    doc["results"] = list;
    if (reduction) {
      doc["reduction"] = {{"passed", reduction->passed},
                          {"alpha", reduction->alpha},
                          {"m_max", reduction->m_max},
                          {"max_deviation", reduction->max_deviation},
                          {"tolerance", reduction->tolerance}};
    }
    s << doc.dump(2) << "\n";
  } else {
    s << manifest.comment();
    s << "target,H,m_max\n";
    for (const auto& r : results) {
      s << csv::escape(g.label(r.target)) << "," << format_fixed(r.harm) << "," << r.m_max << "\n";
    }
    s << "\ntarget,m,size,distinct,x,weighted\n";
    for (const auto& r : results) {
      for (const auto& lvl : r.levels) {
        s << csv::escape(g.label(r.target)) << "," << lvl.level << "," << to_string(lvl.size) << ","
          << lvl.distinct << "," << cell(lvl.value) << "," << cell(lvl.weighted) << "\n";
      }
    }
    if (reduction) {
      std::ostringstream dev;
      dev << std::scientific << std::setprecision(3) << reduction->max_deviation;
      s << "\nreduction check: " << (reduction->passed ? "PASS" : "FAIL") << " (alpha "
        << format_fixed(reduction->alpha) << ", m_max " << reduction->m_max << ", max deviation " << dev.str()
        << ")\n";
    }
  }
  return reduction && !reduction->passed ? kExitData : kExitOk;
}

// ---- whatif ----

struct WhatifArgs {
  GraphInput input;
  ConfigFlags config;
  Format format;
  std::string target;
  std::vector<std::string> perturb;
  std::vector<std::string> remove;
  bool global = false;
  std::string rank;
  std::size_t top = 0;
  std::string output;
};

void write_ranking(std::ostream& s, const Format& format, const Manifest& manifest, const InfluenceReport& report,
                   const HarmGraph& g) {
  if (format.json()) {
    json entries = json::array();
    for (const auto& e : report.entries) entries.push_back({{"node", e.label}, {"score", e.score}});
    json doc{{"manifest", manifest.doc}, {"kind", std::string(to_string(report.kind))}, {"entries", entries}};
    if (report.target) doc["target"] = g.label(*report.target);
    s << doc.dump(2) << "\n";
    return;
  }
  s << manifest.comment() << "rank,node," << to_string(report.kind) << "\n";
  std::size_t rank = 1;
  for (const auto& e : report.entries) s << rank++ << "," << csv::escape(e.label) << "," << format_fixed(e.score) << "\n";
}

int cmd_whatif(const WhatifArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  check_format(a.format);
  const auto cfg = to_config(a.config);
  const int modes = (!a.perturb.empty() || !a.remove.empty()) + a.global + !a.rank.empty();
  if (modes != 1) throw UsageError("choose one of --perturb/--remove, --global or --rank");
  const auto g = load_input(a.input);
  const auto manifest = make_manifest(args, "whatif", input_paths(a.input), output_name(a.output), cfg);
  Sink sink(a.output, out);
  auto& s = sink.stream();

  if (a.global || !a.rank.empty()) {
    ReportKind kind = ReportKind::GlobalInfluence;
    if (!a.global) {
      auto parsed = parse_report_kind(a.rank);
      if (!parsed) bad_choice("--rank", a.rank, {"vulnerability", "influence", "global"});
      kind = *parsed;
    }
    std::optional<NodeId> target;
    if (kind != ReportKind::GlobalInfluence) {
      if (a.target.empty()) throw UsageError("--rank " + a.rank + " needs --target");
      target = g.require(a.target);
    }
    write_ranking(s, a.format, manifest, rank_report(g, target, kind, cfg, a.global ? 0 : a.top), g);
    return kExitOk;
  }

  if (a.target.empty()) throw UsageError("--perturb/--remove need --target");
  const NodeId target = g.require(a.target);
  ScenarioOverlay overlay;
  for (const auto& p : a.perturb) {
    const auto eq = p.find('=');
    const std::string label = p.substr(0, eq);
    double harm = HarmScore::kMax;
    if (eq != std::string::npos) {
      const std::string text = p.substr(eq + 1);
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), harm);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw UsageError("--perturb: cannot read harm in '" + p + "'");
      }
    }
    const NodeId node = g.require(label);
    if (node == target) throw Error(ErrorCode::SelfQuery, "--perturb: '" + label + "' is the target");
    overlay.harm_overrides.insert_or_assign(node, HarmScore(harm));
  }
  for (const auto& label : a.remove) {
    const NodeId node = g.require(label);
    if (node == target) throw Error(ErrorCode::SelfQuery, "--remove: '" + label + "' is the target");
    overlay.removed_nodes.insert(node);
  }
  const double baseline = network_harm(g, target, cfg);
  const double scenario = scored_with(g, overlay, target, cfg);
  if (a.format.json()) {
    json doc{{"manifest", manifest.doc},
             {"target", a.target},
             {"perturb", a.perturb},
             {"remove", a.remove},
             {"baseline", baseline},
             {"scenario", scenario},
             {"delta", scenario - baseline}};
    s << doc.dump(2) << "\n";
  } else {
    s << manifest.comment() << "target,baseline,scenario,delta\n"
      << csv::escape(a.target) << "," << format_fixed(baseline) << "," << format_fixed(scenario) << ","
      << format_fixed(scenario - baseline) << "\n";
  }
  return kExitOk;
}

// ---- fixtures ----

struct FixtureArgs {
  std::vector<std::string> names;
  std::string out_dir = ".";
  bool list = false;
  std::uint64_t seed = 1;
  std::size_t size = 8;
  double density = 0.25;
};

// Deterministic on every platform: only raw engine output is used.
Fixture random_fixture(std::uint64_t seed, std::size_t size, double density) {
  std::mt19937_64 rng(seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1p-53; };
  Fixture f{"random", "random digraph, seed " + std::to_string(seed), "r0", {}, {}};
  for (std::size_t i = 0; i < size; ++i) {
    f.nodes.push_back({"r" + std::to_string(i), HarmScore(static_cast<double>(rng() % 101)), {}});
  }
  for (std::size_t u = 0; u < size; ++u) {
    for (std::size_t v = 0; v < size; ++v) {
      if (u != v && unit() < density) f.edges.push_back({f.nodes[u].label, f.nodes[v].label});
    }
  }
  return f;
}

void write_graph_files(const HarmGraph& g, const fs::path& nodes_path, const fs::path& edges_path,
                       const std::string& header) {
  {
    std::ofstream file(nodes_path, std::ios::binary);
    file << header;
    write_node_table(g, file);
  }
  std::ofstream file(edges_path, std::ios::binary);
  file << header;
  write_edge_table(g, file);
}

int cmd_fixtures(const FixtureArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.list) {
    for (const auto& name : fixture_names()) out << name << "  " << fixture(name).description << "\n";
    out << "random  random digraph (--seed, --size, --density)\n";
    return kExitOk;
  }
  if (a.names.empty()) throw UsageError("name at least one fixture, or use --list");
  if (!(a.density >= 0.0 && a.density <= 1.0)) throw UsageError("--density: must be in [0, 1]");
  fs::create_directories(a.out_dir);
  for (const auto& name : a.names) {
    const bool random = name == "random";
    const Fixture f = random ? random_fixture(a.seed, a.size, a.density) : fixture(name);
    const auto nodes_path = fs::path(a.out_dir) / (f.name + ".nodes.csv");
    const auto edges_path = fs::path(a.out_dir) / (f.name + ".edges.csv");
    const auto manifest = make_manifest(args, "fixtures", json::object(), (fs::path(a.out_dir) / f.name).string(),
                                        std::nullopt, random ? std::optional(a.seed) : std::nullopt);
    const std::string header =
        "# fixture: " + f.name + "\n# target: " + f.target + "\n# " + f.description + "\n" + manifest.comment();
    write_graph_files(f.graph(), nodes_path, edges_path, header);
    out << nodes_path.string() << "\n" << edges_path.string() << "\n";
  }
  return kExitOk;
}

// ---- trade ----

struct TradeArgs {
  std::string flows;
  std::string indicators;
  std::string indicator_spec;
  std::string aliases;
  int year = 0;
  double threshold = 100e6;
  std::string prune_mode = "fixpoint";
  int k = 3;
  std::optional<int> allow_partial;
  ConfigFlags config;
  std::string out_dir;
  bool write_toy = false;
};

std::string joined(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) out += (out.empty() ? "" : " ") + item;
  return out.empty() ? "-" : out;
}

int cmd_trade(const TradeArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.write_toy) {
    for (const auto& p : write_trade_toy(a.out_dir)) out << p.string() << "\n";
    return kExitOk;
  }
  if (a.flows.empty() || a.indicators.empty() || a.indicator_spec.empty() || a.year == 0) {
    throw UsageError("trade needs --flows, --indicators, --indicator-spec and --year");
  }
  const auto mode = parse_prune_mode(a.prune_mode);
  if (!mode) bad_choice("--prune-mode", a.prune_mode, {"once", "fixpoint"});
  if (a.k < 1) throw UsageError("--k: must be positive");
  const auto cfg = to_config(a.config);
  const AliasMap aliases = a.aliases.empty() ? AliasMap{} : load_alias_map(a.aliases);

  const auto records = load_trade_flows(a.flows, aliases);
  const auto skeleton = build_trade_network(records, a.year, a.threshold);
  const auto table = load_indicator_table(a.indicators, aliases);
  const auto specs = load_indicator_specs(a.indicator_spec);
  const auto intrinsic = compute_intrinsic_harms(table, specs, a.k, a.allow_partial);

  // Indicator entities use the same country codes as the flows; labels
  // that are not codes (regional aggregates and the like) are kept as-is
  // and simply never match a trade partner.
  std::map<std::string, double> harms;
  for (const auto& [entity, h] : intrinsic.harms) harms[normalize_country(entity, aliases).value_or(entity)] = h;

  const auto g = prune_trade_network(skeleton, harms, *mode);
  const auto other = prune_trade_network(skeleton, harms, *mode == PruneMode::Once ? PruneMode::Fixpoint : PruneMode::Once);
  std::vector<std::string> pruned;
  for (const auto& c : skeleton.countries) {
    if (!g.find(c) && harms.contains(c)) pruned.push_back(c);
  }

  const auto scores = network_harm_all(g, cfg);
  const auto gi = rank_report(g, std::nullopt, ReportKind::GlobalInfluence, cfg, 0);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  json inputs{{"flows", a.flows}, {"indicators", a.indicators}, {"indicator_spec", a.indicator_spec}};
  if (!a.aliases.empty()) inputs["aliases"] = a.aliases;
  const auto manifest = make_manifest(args, "trade", inputs, dir.string(), cfg);
  const auto header = manifest.comment();

  write_graph_files(g, dir / "network.nodes.csv", dir / "network.edges.csv", header);
  {
    std::ofstream file(dir / "scores.csv", std::ios::binary);
    file << header << "country,h,H\n";
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
      file << g.label(NodeId{i}) << "," << format_fixed(g.harm(NodeId{i})) << "," << format_fixed(scores[i]) << "\n";
    }
  }
  {
    std::ofstream file(dir / "gi.csv", std::ios::binary);
    file << header << "rank,country,gi\n";
    std::size_t rank = 1;
    for (const auto& e : gi.entries) file << rank++ << "," << e.label << "," << format_fixed(e.score) << "\n";
  }
  {
    auto doc = graph_to_json(g);
    json countries = json::array();
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
      countries.push_back({{"code", g.label(NodeId{i})}, {"h", g.harm(NodeId{i})}, {"H", scores[i]}});
    }
    json gi_rows = json::array();
    for (const auto& e : gi.entries) gi_rows.push_back({{"code", e.label}, {"gi", e.score}});
    doc["countries"] = countries;
    doc["global_influence"] = gi_rows;
    doc["excluded"] = intrinsic.excluded;
    doc["pruned"] = pruned;
    doc["manifest"] = manifest.doc;
    std::ofstream(dir / "network.json", std::ios::binary) << doc.dump(2) << "\n";
  }

  out << "year " << a.year << ": " << skeleton.countries.size() << " trading countries, "
      << skeleton.edges.size() << " links above " << format_fixed(a.threshold, 0) << " USD\n"
      << "excluded for missing indicators: " << joined(intrinsic.excluded) << "\n"
      << "pruned: " << joined(pruned) << "\n"
      << "countries remaining: " << g.node_count() << " (prune-mode " << to_string(*mode) << "), "
      << other.node_count() << " with prune-mode " << to_string(*mode == PruneMode::Once ? PruneMode::Fixpoint : PruneMode::Once)
      << "\n"
      << "wrote " << (dir / "network.nodes.csv").string() << ", network.edges.csv, scores.csv, gi.csv, network.json\n";
  return kExitOk;
}

// ---- ratings ----

struct RatingArgs {
  std::string input;
  std::string scale = "numeric";
  double min = 0.0;
  double max = 100.0;
  bool higher_is_better = true;
  std::string output;
};

// entity,rating  ->  label,harm
int cmd_ratings(const RatingArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.scale != "numeric" && a.scale != "msci") bad_choice("--scale", a.scale, {"numeric", "msci"});
  if (!(a.max > a.min)) throw UsageError("--max must exceed --min");
  const auto table = csv::read_file(a.input);
  csv::expect_header(table, {"entity", "rating"});
  const auto manifest = make_manifest(args, "ratings", json{{"ratings", a.input}}, output_name(a.output));
  Sink sink(a.output, out);
  auto& s = sink.stream();
  s << manifest.comment() << "label,harm\n";
  const NumericScale numeric{a.min, a.max, a.higher_is_better};
  const auto grades = msci_grades();
  for (const auto& row : table.rows) {
    const auto& label = csv::field(table, row, 0).text;
    double harm = 0.0;
    try {
      harm = a.scale == "msci" ? harm_from_rating(csv::field(table, row, 1).text, grades).value()
                               : harm_from_rating(csv::parse_real(table, row, 1), numeric).value();
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(table.source, row.line, csv::field(table, row, 1).column, e.what());
    }
    s << csv::escape(label) << "," << format_fixed(harm) << "\n";
  }
  return kExitOk;
}

// ---- kcore ----

struct KcoreArgs {
  GraphInput input;
  int k = 5;
  std::string out_dir = ".";
  std::string name = "core";
};

int cmd_kcore(const KcoreArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.k < 0) throw UsageError("--k: must be non-negative");
  const auto g = load_input(a.input);
  const auto core = k_core(g, a.k);
  fs::create_directories(a.out_dir);
  const auto nodes_path = fs::path(a.out_dir) / (a.name + ".nodes.csv");
  const auto edges_path = fs::path(a.out_dir) / (a.name + ".edges.csv");
  const auto manifest = make_manifest(args, "kcore", input_paths(a.input), (fs::path(a.out_dir) / a.name).string());
  write_graph_files(core, nodes_path, edges_path, manifest.comment());
  out << a.k << "-core: " << core.node_count() << " of " << g.node_count() << " nodes, " << core.edge_count()
      << " of " << g.edge_count() << " edges\n";
  return kExitOk;
}

// ---- serve ----

struct ServeArgs {
  GraphInput input;
  std::string host = "127.0.0.1";
  int port = 8080;
  long session_timeout = 3600;
  long ranking_timeout = 60;
  std::string cors_origin = "http://localhost:5173";
};

service::HttpServer* active_server = nullptr;

extern "C" void handle_stop_signal(int) {
  if (active_server) active_server->stop();
}

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  service::Options options;
  options.session_timeout = std::chrono::seconds(a.session_timeout);
  options.ranking_timeout = std::chrono::seconds(a.ranking_timeout);
  options.cors_origin = a.cors_origin;
  service::Service svc(options);
  service::HttpServer server(svc);
  const int port = server.bind(a.host, a.port);
  svc.load(load_input(a.input));
  out << "serving on http://" << a.host << ":" << port << std::endl;
  active_server = &server;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  server.listen();
  active_server = nullptr;
  return kExitOk;
}

// ---- replay ----

json read_manifest(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::ParseError, path + ": cannot open");
  const std::string content((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  const std::string marker = "# manifest: ";
  std::istringstream lines(content);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind(marker, 0) == 0) return json::parse(line.substr(marker.size()));
  }
  try {
    auto doc = json::parse(content);
    if (doc.contains("manifest")) return doc["manifest"];
  } catch (const json::parse_error&) {
  }
  throw Error(ErrorCode::ParseError, path + ": no run manifest found");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"netharm: network harm scores for supply and trade networks"};
  app.name("netharm");
  app.require_subcommand(1);
  app.set_version_flag("--version", NETHARM_VERSION);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "network harm per target with level breakdown");
  add_graph_options(score_cmd, score.input);
  add_config_options(score_cmd, score.config);
  add_format_option(score_cmd, score.format);
  score_cmd->add_option("--target", score.targets, "target label (repeatable; default: every node)");
  score_cmd->add_flag("--verify-reduction", score.verify, "check Sum/Sum over all paths against the closed form");
  score_cmd->add_option("--tolerance", score.tolerance, "reduction check tolerance")->capture_default_str();
  score_cmd->add_option("--output", score.output, "output file (default: stdout)");

  WhatifArgs whatif;
  auto* whatif_cmd = app.add_subcommand("whatif", "vulnerability, influence and global influence reports");
  add_graph_options(whatif_cmd, whatif.input);
  add_config_options(whatif_cmd, whatif.config);
  add_format_option(whatif_cmd, whatif.format);
  whatif_cmd->add_option("--target", whatif.target, "target label");
  whatif_cmd->add_option("--perturb", whatif.perturb, "set a node's harm: LABEL[=HARM], HARM defaults to 100");
  whatif_cmd->add_option("--remove", whatif.remove, "remove a node (repeatable)");
  whatif_cmd->add_flag("--global", whatif.global, "global influence of every node");
  whatif_cmd->add_option("--rank", whatif.rank, "rank nodes by vulnerability, influence or global");
  whatif_cmd->add_option("--top", whatif.top, "keep the first N ranked nodes (0 = all)")->capture_default_str();
  whatif_cmd->add_option("--output", whatif.output, "output file (default: stdout)");

  FixtureArgs fixtures;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "write built-in example networks");
  fixtures_cmd->add_option("names", fixtures.names, "fixture names, or 'random'");
  fixtures_cmd->add_option("--out-dir", fixtures.out_dir, "output directory")->capture_default_str();
  fixtures_cmd->add_flag("--list", fixtures.list, "list fixtures");
  fixtures_cmd->add_option("--seed", fixtures.seed, "seed for 'random'")->capture_default_str();
  fixtures_cmd->add_option("--size", fixtures.size, "node count for 'random'")->capture_default_str();
  fixtures_cmd->add_option("--density", fixtures.density, "edge probability for 'random'")->capture_default_str();

  TradeArgs trade;
  auto* trade_cmd = app.add_subcommand("trade", "build, prune and score a trade network");
  trade_cmd->add_option("--flows", trade.flows, "origin,dest,sector,year,value_usd");
  trade_cmd->add_option("--indicators", trade.indicators, "entity,indicator,value");
  trade_cmd->add_option("--indicator-spec", trade.indicator_spec, "indicator,higher_is_better");
  trade_cmd->add_option("--aliases", trade.aliases, "alias,canonical country names");
  trade_cmd->add_option("--year", trade.year, "flow year");
  trade_cmd->add_option("--threshold", trade.threshold, "link threshold in USD (strict)")->capture_default_str();
  trade_cmd->add_option("--prune-mode", trade.prune_mode, "once or fixpoint")->capture_default_str();
  trade_cmd->add_option("--k", trade.k, "indicators averaged into intrinsic harm")->capture_default_str();
  trade_cmd->add_option("--allow-partial", trade.allow_partial, "score countries with at least N indicators");
  add_config_options(trade_cmd, trade.config);
  trade_cmd->add_option("--out-dir", trade.out_dir, "output directory")->required();
  trade_cmd->add_flag("--write-toy-inputs", trade.write_toy, "write the toy input files to --out-dir and stop");

  RatingArgs ratings;
  auto* ratings_cmd = app.add_subcommand("ratings", "convert external ratings (entity,rating) to harm scores");
  ratings_cmd->add_option("--input", ratings.input, "ratings table")->required();
  ratings_cmd->add_option("--scale", ratings.scale, "numeric or msci")->capture_default_str();
  ratings_cmd->add_option("--min", ratings.min, "numeric scale minimum")->capture_default_str();
  ratings_cmd->add_option("--max", ratings.max, "numeric scale maximum")->capture_default_str();
  ratings_cmd->add_option("--higher-is-better", ratings.higher_is_better, "true when high ratings are good")
      ->capture_default_str();
  ratings_cmd->add_option("--output", ratings.output, "output file (default: stdout)");

  KcoreArgs kcore;
  auto* kcore_cmd = app.add_subcommand("kcore", "restrict a graph to its undirected k-core");
  add_graph_options(kcore_cmd, kcore.input);
  kcore_cmd->add_option("--k", kcore.k, "core order")->capture_default_str();
  kcore_cmd->add_option("--out-dir", kcore.out_dir, "output directory")->capture_default_str();
  kcore_cmd->add_option("--name", kcore.name, "output file stem")->capture_default_str();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP API for the browser front end");
  add_graph_options(serve_cmd, serve.input);
  serve_cmd->add_option("--host", serve.host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "port (0 = any free port)")->capture_default_str();
  serve_cmd->add_option("--session-timeout", serve.session_timeout, "idle seconds before a session expires")
      ->capture_default_str();
  serve_cmd->add_option("--ranking-timeout", serve.ranking_timeout, "seconds before rankings turn into jobs")
      ->capture_default_str();
  serve_cmd->add_option("--cors-origin", serve.cors_origin, "allowed browser origin")->capture_default_str();

  std::string replay_file;
  auto* replay_cmd = app.add_subcommand("replay", "re-run the command recorded in an output's manifest");
  replay_cmd->add_option("file", replay_file, "output file carrying a manifest")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << NETHARM_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "netharm: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (score_cmd->parsed()) return cmd_score(score, args, out);
    if (whatif_cmd->parsed()) return cmd_whatif(whatif, args, out);
    if (fixtures_cmd->parsed()) return cmd_fixtures(fixtures, args, out);
    if (trade_cmd->parsed()) return cmd_trade(trade, args, out);
    if (ratings_cmd->parsed()) return cmd_ratings(ratings, args, out);
    if (kcore_cmd->parsed()) return cmd_kcore(kcore, args, out);
    if (serve_cmd->parsed()) return cmd_serve(serve, out);
    if (replay_cmd->parsed()) {
      const auto manifest = read_manifest(replay_file);
      const auto recorded = manifest.at("args").get<std::vector<std::string>>();
      if (!recorded.empty() && recorded.front() == "replay") throw UsageError("refusing to replay a replay");
      return run(recorded, out, err);
    }
  } catch (const UsageError& e) {
    err << "netharm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "netharm: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    err << "netharm: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "netharm: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace netharm::cli
