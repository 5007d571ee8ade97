#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

// before httplib: resolv.h defines _res, which clashes with Eigen
#include "properties.hpp"

#include <httplib.h>
#include <json.hpp>

#include "netharm/cli.hpp"
#include "netharm/fixtures.hpp"
#include "netharm/ingest.hpp"
#include "netharm/metrics.hpp"
#include "netharm/service.hpp"
#include "netharm/whatif.hpp"

using namespace netharm;
using nlohmann::json;
using service::Response;
using service::Service;

namespace {

json body_of(const Response& r) { return r.body.empty() ? json() : json::parse(r.body); }

std::string header(const Response& r, const std::string& key) {
  for (const auto& [k, v] : r.headers) {
    if (k == key) return v;
  }
  return {};
}

Response call(Service& s, std::string_view method, std::string_view path, const json& body = nullptr) {
  return s.handle(method, path, body.is_null() ? "" : body.dump());
}

std::unique_ptr<Service> loaded(const std::string& name, service::Options opts = {}) {
  auto s = std::make_unique<Service>(std::move(opts));
  s->load(fixture(name).graph());
  return s;
}

json fig5a_config() { return {{"inner", "avg"}, {"outer", "avg"}, {"alpha", 1.0}, {"scheme", "shortest-all"}}; }

}  // namespace

TEST_CASE("health before and after loading") {
  Service s;
  auto r = call(s, "GET", "/api/health");
  CHECK(r.status == 503);
  CHECK(body_of(r)["status"] == "loading");
  CHECK(call(s, "POST", "/api/score", {{"target", "a"}}).status == 503);
  s.load(fixture("fig5a").graph());
  r = call(s, "GET", "/api/health");
  CHECK(r.status == 200);
  CHECK(body_of(r)["status"] == "ok");
  CHECK(body_of(r)["nodes"] == 7);
}

TEST_CASE("graph and score") {
  auto s = loaded("fig5a");
  const auto graph = body_of(call(*s, "GET", "/api/graph"));
  CHECK(graph["node_count"] == 7);
  CHECK(graph_from_json(graph).node_count() == 7);

  const auto r = call(*s, "POST", "/api/score", {{"target", "target"}, {"config", fig5a_config()}});
  REQUIRE(r.status == 200);
  const auto doc = body_of(r);
  CHECK(doc["H"].get<double>() == doctest::Approx(54.375));
  CHECK(doc["m_max"] == 6);
  CHECK(doc["levels"][0]["x"].get<double>() == doctest::Approx(47.5));
  CHECK(doc["levels"][1]["size"] == 4);
  CHECK(doc["levels"][2]["x"].is_null());

  // no state kept between calls
  CHECK(call(*s, "POST", "/api/score", {{"target", "target"}, {"config", fig5a_config()}}).body == r.body);
  const auto dflt = body_of(call(*s, "POST", "/api/score", {{"target", "target"}}));
  const auto g = fixture("fig5a").graph();
  CHECK(dflt["H"].get<double>() == network_harm(g, g.require("target"), HarmConfig{}));
  CHECK(body_of(call(*s, "POST", "/api/score", {{"target", "target"}, {"config", {{"m_max", "auto"}}}}))["H"] ==
        dflt["H"]);
}

TEST_CASE("request errors") {
  auto s = loaded("cycle");
  auto r = call(*s, "POST", "/api/score", {{"target", "nobody"}});
  CHECK(r.status == 404);
  CHECK(body_of(r)["error"]["code"] == "UnknownNode");

  r = call(*s, "POST", "/api/score",
           {{"config", {{"alpha", 2.0}, {"inner", "median"}, {"m_max", 0}, {"scheme", 3}, {"direction", "sideways"}}}});
  CHECK(r.status == 400);
  const auto fields = body_of(r)["error"]["fields"];
  for (const char* key : {"target", "config.alpha", "config.inner", "config.m_max", "config.scheme", "config.direction"}) {
    CHECK_MESSAGE(fields.contains(key), key);
  }
  CHECK_FALSE(fields.contains("config.outer"));

  CHECK(s->handle("POST", "/api/score", "{not json").status == 400);
  CHECK(s->handle("POST", "/api/score", "[1,2]").status == 400);
  CHECK(call(*s, "GET", "/api/nothing").status == 404);
  CHECK(call(*s, "GET", "/elsewhere").status == 404);

  // unbounded walks need sum/sum, which diverges around a cycle at alpha 1
  r = call(*s, "POST", "/api/score",
           {{"target", "a"}, {"config", {{"scheme", "all"}, {"alpha", 1.0}, {"m_max", nullptr}}}});
  CHECK(r.status == 400);
  CHECK(body_of(r)["error"]["code"] == "InvalidMMax");
  r = call(*s, "POST", "/api/score",
           {{"target", "a"},
            {"config", {{"scheme", "all"}, {"inner", "sum"}, {"outer", "sum"}, {"alpha", 1.0}, {"m_max", nullptr}}}});
  CHECK(r.status == 422);
  CHECK(body_of(r)["error"]["code"] == "DivergentConfig");
  r = call(*s, "POST", "/api/score",
           {{"target", "a"},
            {"config", {{"scheme", "all"}, {"inner", "sum"}, {"outer", "sum"}, {"alpha", 0.5}, {"m_max", nullptr}}}});
  CHECK(r.status == 200);
}

TEST_CASE("headers") {
  service::Options opts;
  opts.cors_origin = "http://example.test";
  auto s = loaded("pair", opts);
  for (const auto& r : {call(*s, "GET", "/api/health"), call(*s, "GET", "/api/missing"),
                        call(*s, "OPTIONS", "/api/score")}) {
    CHECK(header(r, "Access-Control-Allow-Origin") == "http://example.test");
    CHECK(header(r, "Access-Control-Allow-Methods").find("PUT") != std::string::npos);
    CHECK(header(r, "X-Netharm-Version") == NETHARM_VERSION);
  }
  CHECK(call(*s, "OPTIONS", "/api/session/s1").status == 204);
  CHECK(call(*s, "GET", "/api/health?verbose=1").status == 200);
}

TEST_CASE("session lifecycle") {
  auto s = loaded("fig5a");
  const auto g = fixture("fig5a").graph();
  const auto t = g.require("target");
  HarmConfig cfg;
  cfg.inner = Aggregator::avg();
  cfg.outer = Aggregator::avg();
  cfg.alpha = 1.0;

  auto r = call(*s, "POST", "/api/session", {{"target", "target"}, {"config", fig5a_config()}});
  REQUIRE(r.status == 201);
  auto doc = body_of(r);
  const std::string id = doc["id"];
  const std::string base = "/api/session/" + id;
  CHECK(doc["baseline"].get<double>() == doctest::Approx(54.375));
  CHECK(doc["delta"] == 0.0);
  CHECK(doc["overrides"].empty());

  r = call(*s, "POST", base + "/override", {{"node", "n10"}, {"harm", 100}});
  REQUIRE(r.status == 200);
  doc = body_of(r);
  ScenarioOverlay overlay;
  overlay.harm_overrides[g.require("n10")] = HarmScore(100);
  CHECK(doc["H"].get<double>() == scored_with(g, overlay, t, cfg));
  CHECK(doc["delta"].get<double>() == doctest::Approx(vulnerability(g, t, g.require("n10"), cfg)));
  CHECK(doc["overrides"]["n10"] == 100.0);

  r = call(*s, "POST", base + "/remove", {{"node", "n10"}});
  CHECK(r.status == 409);
  CHECK(body_of(r)["error"]["code"] == "Conflict");
  r = call(*s, "POST", base + "/remove", {{"node", "target"}});
  CHECK(r.status == 400);
  CHECK(body_of(r)["error"]["fields"].contains("node"));
  CHECK(call(*s, "POST", base + "/override", {{"node", "n10"}, {"harm", 101}}).status == 400);
  CHECK(call(*s, "POST", base + "/override", {{"node", "ghost"}, {"harm", 10}}).status == 404);

  r = call(*s, "POST", base + "/remove", {{"node", "n85"}});
  REQUIRE(r.status == 200);
  overlay.removed_nodes.insert(g.require("n85"));
  CHECK(body_of(r)["H"].get<double>() == scored_with(g, overlay, t, cfg));
  CHECK(body_of(r)["removed"] == json::array({"n85"}));
  CHECK(call(*s, "POST", base + "/override", {{"node", "n85"}, {"harm", 5}}).status == 409);

  // undo one edit at a time
  r = call(*s, "DELETE", base + "/override/n10");
  REQUIRE(r.status == 200);
  overlay.harm_overrides.clear();
  CHECK(body_of(r)["H"].get<double>() == scored_with(g, overlay, t, cfg));
  CHECK(call(*s, "DELETE", base + "/override/n10").status == 404);
  r = call(*s, "DELETE", base + "/remove/n85");
  REQUIRE(r.status == 200);
  CHECK(body_of(r)["delta"] == 0.0);

  call(*s, "POST", base + "/remove", {{"node", "n50"}});
  r = call(*s, "POST", base + "/reset");
  CHECK(body_of(r)["removed"].empty());
  CHECK(body_of(r)["H"] == body_of(r)["baseline"]);

  // a new config keeps the scenario and rescores both numbers
  call(*s, "POST", base + "/override", {{"node", "n50"}, {"harm", 0}});
  r = call(*s, "PUT", base + "/config", {{"config", {{"inner", "max"}, {"outer", "max"}, {"alpha", 0.5}}}});
  REQUIRE(r.status == 200);
  doc = body_of(r);
  HarmConfig mm;
  mm.inner = Aggregator::max();
  mm.outer = Aggregator::max();
  mm.alpha = 0.5;
  overlay = {};
  overlay.harm_overrides[g.require("n50")] = HarmScore(0);
  CHECK(doc["baseline"].get<double>() == network_harm(g, t, mm));
  CHECK(doc["H"].get<double>() == scored_with(g, overlay, t, mm));
  CHECK(doc["config"]["inner"] == "max");
  CHECK(call(*s, "PUT", base + "/config", {{"config", {{"alpha", -1}}}}).status == 400);
  CHECK(body_of(call(*s, "GET", base))["config"]["alpha"] == 0.5);

  CHECK(call(*s, "DELETE", base).status == 204);
  CHECK(call(*s, "GET", base).status == 404);
  CHECK(call(*s, "DELETE", base).status == 404);
  CHECK(call(*s, "POST", "/api/session", {{"target", "ghost"}}).status == 404);
}

TEST_CASE("session deltas stay within bounds") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = oracle::random_graph(rng, 3 + rng() % 5, 0.35);
    Service s;
    s.load(g);
    const auto t = props::random_node(rng, g);
    const auto n = props::random_node(rng, g);
    if (n == t) continue;
    const auto cfg = props::random_config(rng, g.node_count());
    json config{{"inner", cfg.inner.name()},
                {"outer", cfg.outer.name()},
                {"alpha", cfg.alpha},
                {"m_max", *cfg.m_max},
                {"scheme", std::string(to_string(cfg.scheme))},
                {"direction", std::string(to_string(cfg.direction))}};
    const std::string id = body_of(call(s, "POST", "/api/session", {{"target", g.label(t)}, {"config", config}}))["id"];
    const auto v = body_of(call(s, "POST", "/api/session/" + id + "/override", {{"node", g.label(n)}, {"harm", 100}}));
    if (cfg.inner.is_bounded() && cfg.outer.is_bounded()) {
      CHECK(v["delta"].get<double>() >= -1e-9);
    }
    call(s, "POST", "/api/session/" + id + "/reset");
    const auto i = body_of(call(s, "POST", "/api/session/" + id + "/remove", {{"node", g.label(n)}}));
    if (cfg.inner.is_bounded() && cfg.outer.is_bounded()) {
      CHECK(i["delta"].get<double>() >= -100 - 1e-9);
      CHECK(i["delta"].get<double>() <= 100 + 1e-9);
    }
    CHECK(i["delta"].get<double>() == doctest::Approx(influence(g, t, n, cfg)));
  }
}

TEST_CASE("sessions expire after the idle timeout") {
  auto now = std::make_shared<std::atomic<std::int64_t>>(0);
  service::Options opts;
  opts.session_timeout = std::chrono::seconds(60);
  opts.clock = [now] { return std::chrono::steady_clock::time_point(std::chrono::seconds(now->load())); };
  auto s = loaded("chain", opts);
  const std::string a = body_of(call(*s, "POST", "/api/session", {{"target", "a"}}))["id"];
  const std::string b = body_of(call(*s, "POST", "/api/session", {{"target", "b"}}))["id"];
  CHECK(a != b);
  CHECK(s->session_count() == 2);
  *now = 50;
  CHECK(call(*s, "GET", "/api/session/" + a).status == 200);  // touches a
  *now = 100;
  CHECK(s->expire_sessions() == 1);
  CHECK(call(*s, "GET", "/api/session/" + b).status == 404);
  CHECK(call(*s, "GET", "/api/session/" + a).status == 200);
  *now = 161;
  CHECK(call(*s, "GET", "/api/session/" + a).status == 404);
  CHECK(s->session_count() == 0);
}

TEST_CASE("concurrent sessions do not see each other's edits") {
  auto s = loaded("fig5a");
  const auto g = fixture("fig5a").graph();
  const std::vector<std::string> nodes{"n10", "n85", "n75", "n60a", "n60b", "n50"};
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    ids.push_back(body_of(call(*s, "POST", "/api/session", {{"target", "target"}, {"config", fig5a_config()}}))["id"]);
  }
  std::atomic<int> mismatches{0};
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    threads.emplace_back([&, i] {
      const auto node = g.find(nodes[i]);
      if (!node) {
        ++mismatches;
        return;
      }
      HarmConfig cfg;
      cfg.inner = Aggregator::avg();
      cfg.outer = Aggregator::avg();
      cfg.alpha = 1.0;
      for (int round = 0; round < 25; ++round) {
        const double harm = (round * 7 + i * 13) % 101;
        const auto r = body_of(call(*s, "POST", "/api/session/" + ids[i] + "/override",
                                    {{"node", nodes[i]}, {"harm", harm}}));
        ScenarioOverlay overlay;
        overlay.harm_overrides[*node] = HarmScore(harm);
        if (r["overrides"].size() != 1 || r["H"].get<double>() != scored_with(g, overlay, g.require("target"), cfg)) {
          ++mismatches;
        }
        // concurrent stateless scoring
        call(*s, "POST", "/api/score", {{"target", nodes[(i + 1) % nodes.size()]}});
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(mismatches == 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto doc = body_of(call(*s, "GET", "/api/session/" + ids[i]));
    CHECK(doc["overrides"].size() == 1);
    CHECK(doc["overrides"].contains(nodes[i]));
  }
}

TEST_CASE("rankings") {
  auto s = loaded("star");
  const auto cfg = json{{"inner", "avg"}, {"outer", "max"}, {"alpha", 0.85}};
  auto r = call(*s, "POST", "/api/rankings", {{"kind", "vulnerability"}, {"target", "hub"}, {"config", cfg}, {"top_n", 3}});
  REQUIRE(r.status == 200);
  auto doc = body_of(r);
  CHECK(doc["target"] == "hub");
  REQUIRE(doc["entries"].size() == 3);
  CHECK(doc["entries"][0]["node"] == "l1");
  CHECK(doc["entries"][0]["score"].get<double>() == doctest::Approx(20));

  doc = body_of(call(*s, "POST", "/api/rankings", {{"kind", "global"}, {"top_n", 0}}));
  CHECK(doc["entries"].size() == 6);
  CHECK(doc["kind"] == "global");

  r = call(*s, "POST", "/api/rankings", {{"kind", "influence"}});
  CHECK(r.status == 400);
  CHECK(body_of(r)["error"]["fields"].contains("target"));
  r = call(*s, "POST", "/api/rankings", {{"kind", "popularity"}, {"top_n", -1}});
  CHECK(body_of(r)["error"]["fields"].contains("kind"));
  CHECK(body_of(r)["error"]["fields"].contains("top_n"));
  CHECK(call(*s, "GET", "/api/jobs/j999").status == 404);
}

TEST_CASE("slow rankings turn into jobs") {
  std::mt19937_64 rng(5);
  const auto g = oracle::random_graph(rng, 150, 0.04);
  service::Options opts;
  opts.ranking_timeout = std::chrono::milliseconds(0);
  Service s(opts);
  s.load(g);
  const json request{{"kind", "global"}, {"config", {{"scheme", "shortest-all"}}}, {"top_n", 5}};
  auto r = call(s, "POST", "/api/rankings", request);
  REQUIRE(r.status == 202);
  const std::string location = header(r, "Location");
  CHECK(location == "/api/jobs/" + body_of(r)["job"].get<std::string>());
  for (int i = 0; i < 6000; ++i) {
    r = call(s, "GET", location);
    if (r.status != 202) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  REQUIRE(r.status == 200);
  const auto expected = rank_report(g, std::nullopt, ReportKind::GlobalInfluence, HarmConfig{}, 5);
  const auto doc = body_of(r);
  REQUIRE(doc["entries"].size() == expected.entries.size());
  for (std::size_t i = 0; i < expected.entries.size(); ++i) {
    CHECK(doc["entries"][i]["node"] == expected.entries[i].label);
    CHECK(doc["entries"][i]["score"].get<double>() == expected.entries[i].score);
  }
}

TEST_CASE("over HTTP") {
  auto s = loaded("fig5a");
  service::HttpServer server(*s);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 200 && !client.Get("/api/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  auto health = client.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("X-Netharm-Version") == NETHARM_VERSION);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

  const json req{{"target", "target"}, {"config", fig5a_config()}};
  auto score = client.Post("/api/score", req.dump(), "application/json");
  REQUIRE(score);
  CHECK(score->status == 200);
  CHECK(json::parse(score->body)["H"].get<double>() == doctest::Approx(54.375));

  auto opened = client.Post("/api/session", req.dump(), "application/json");
  REQUIRE(opened);
  CHECK(opened->status == 201);
  const std::string id = json::parse(opened->body)["id"];
  auto put = client.Put("/api/session/" + id + "/config", json{{"config", {{"inner", "max"}}}}.dump(),
                        "application/json");
  REQUIRE(put);
  CHECK(put->status == 200);
  auto del = client.Delete("/api/session/" + id);
  REQUIRE(del);
  CHECK(del->status == 204);
  auto bad = client.Post("/api/score", "{", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto pre = client.Options("/api/score");
  REQUIRE(pre);
  CHECK(pre->status == 204);

  server.stop();
  loop.join();
}

TEST_CASE("service and command line agree on random graphs") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "netharm_service_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = oracle::random_graph(rng, 2 + rng() % 8, 0.3);
    const auto t = props::random_node(rng, g);
    const auto cfg = props::random_config(rng, g.node_count());
    const auto file = dir / ("g" + std::to_string(trial) + ".json");
    std::ofstream(file) << graph_to_json(g).dump();

    std::ostringstream out, err;
    const int code = cli::run({"score", "--graph", file.string(), "--target", g.label(t), "--inner", cfg.inner.name(),
                               "--outer", cfg.outer.name(), "--alpha", std::to_string(cfg.alpha), "--mmax",
                               std::to_string(*cfg.m_max), "--scheme", std::string(to_string(cfg.scheme)),
                               "--direction", std::string(to_string(cfg.direction)), "--format", "json"},
                              out, err);
    REQUIRE_MESSAGE(code == 0, err.str());
    const auto cli_doc = json::parse(out.str())["results"][0];

    // the CLI parsed alpha from its decimal text; send the service the same value
    const double alpha = std::stod(std::to_string(cfg.alpha));
    Service s;
    s.load(g);
    const auto r = call(s, "POST", "/api/score",
                        {{"target", g.label(t)},
                         {"config",
                          {{"inner", cfg.inner.name()},
                           {"outer", cfg.outer.name()},
                           {"alpha", alpha},
                           {"m_max", *cfg.m_max},
                           {"scheme", std::string(to_string(cfg.scheme))},
                           {"direction", std::string(to_string(cfg.direction))}}}});
    REQUIRE(r.status == 200);
    const auto doc = body_of(r);
    CHECK(doc["H"] == cli_doc["H"]);
    CHECK(doc["levels"].size() == cli_doc["levels"].size());
  }
  fs::remove_all(dir);
}
