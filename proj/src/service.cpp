#include "netharm/service.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "netharm/errors.hpp"
#include "netharm/ingest.hpp"
#include "netharm/metrics.hpp"
#include "netharm/whatif.hpp"

namespace netharm::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

using FieldErrors = std::map<std::string, std::string>;

// Carries an HTTP status through the handlers.
struct HttpError {
  int status;
  std::string code;
  std::string message;
  FieldErrors fields;
};

[[noreturn]] void fail(int status, std::string code, std::string message, FieldErrors fields = {}) {
  throw HttpError{status, std::move(code), std::move(message), std::move(fields)};
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownNode: return 404;
    case ErrorCode::AlphaOutOfRange:
    case ErrorCode::InvalidMMax:
    case ErrorCode::InvalidAggregator:
    case ErrorCode::InvalidOverlay:
    case ErrorCode::SelfQuery:
    case ErrorCode::HarmOutOfRange:
    case ErrorCode::ParseError:
    case ErrorCode::ConstraintViolation: return 400;
    case ErrorCode::BudgetExceeded:
    case ErrorCode::DivergentConfig:
    case ErrorCode::AlphaTooLarge:
    case ErrorCode::GraphTooLarge:
    case ErrorCode::PathCountOverflow: return 422;
    default: return 500;
  }
}

json error_body(const std::string& code, const std::string& message, const FieldErrors& fields) {
  json err{{"code", code}, {"message", message}};
  if (!fields.empty()) err["fields"] = fields;
  return json{{"error", err}};
}

json count_json(PathCount count) {
  if (count <= std::numeric_limits<std::uint64_t>::max()) return static_cast<std::uint64_t>(count);
  return to_string(count);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json config_json(const HarmConfig& cfg) {
  return {{"inner", cfg.inner.name()},
          {"outer", cfg.outer.name()},
          {"alpha", cfg.alpha},
          {"m_max", cfg.m_max ? json(*cfg.m_max) : json(nullptr)},
          {"scheme", std::string(to_string(cfg.scheme))},
          {"direction", std::string(to_string(cfg.direction))}};
}

// Reads a HarmConfig; every problem is reported against its field name.
HarmConfig parse_config(const json& body, const std::string& prefix, FieldErrors& errors) {
  HarmConfig cfg;
  if (body.is_null()) return cfg;
  if (!body.is_object()) {
    errors[prefix] = "must be an object";
    return cfg;
  }
  auto text = [&](const char* key) -> std::optional<std::string> {
    if (!body.contains(key)) return std::nullopt;
    if (!body[key].is_string()) {
      errors[prefix + "." + key] = "must be a string";
      return std::nullopt;
    }
    return body[key].get<std::string>();
  };
  for (const char* key : {"inner", "outer"}) {
    if (auto s = text(key)) {
      if (auto agg = Aggregator::parse(*s)) {
        (std::string_view(key) == "inner" ? cfg.inner : cfg.outer) = *agg;
      } else {
        errors[prefix + "." + key] = "expected max, avg, sum or top-<k> with k in (0, 100]";
      }
    }
  }
  if (body.contains("alpha")) {
    const auto& a = body["alpha"];
    if (!a.is_number()) {
      errors[prefix + ".alpha"] = "must be a number";
    } else {
      cfg.alpha = a.get<double>();
      if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) errors[prefix + ".alpha"] = "must be in (0, 1]";
    }
  }
  if (body.contains("m_max")) {
    const auto& m = body["m_max"];
    if (m.is_null() || (m.is_string() && m.get<std::string>() == "auto")) {
      cfg.m_max.reset();
    } else if (m.is_number_integer() && m.get<long long>() >= 1 && m.get<long long>() <= 1'000'000) {
      cfg.m_max = m.get<int>();
    } else {
      errors[prefix + ".m_max"] = "must be a positive integer, null or \"auto\"";
    }
  }
  if (auto s = text("scheme")) {
    if (auto scheme = parse_scheme(*s)) {
      cfg.scheme = *scheme;
    } else {
      errors[prefix + ".scheme"] = "expected all, simple, shortest-all or shortest-single";
    }
  }
  if (auto s = text("direction")) {
    if (auto dir = parse_direction(*s)) {
      cfg.direction = *dir;
    } else {
      errors[prefix + ".direction"] = "expected upstream or downstream";
    }
  }
  return cfg;
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  try {
    auto doc = json::parse(body);
    if (!doc.is_object()) fail(400, "BadRequest", "request body must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    fail(400, "BadRequest", std::string("malformed JSON: ") + e.what());
  }
}

std::string required_string(const json& body, const std::string& key, FieldErrors& errors) {
  if (!body.contains(key)) {
    errors[key] = "is required";
    return {};
  }
  if (!body[key].is_string()) {
    errors[key] = "must be a string";
    return {};
  }
  return body[key].get<std::string>();
}

void check_fields(const FieldErrors& errors) {
  if (!errors.empty()) fail(400, "InvalidRequest", "request has invalid fields", errors);
}

NodeId node_or_404(const HarmGraph& g, const std::string& label) {
  auto id = g.find(label);
  if (!id) fail(404, "UnknownNode", "unknown node '" + label + "'");
  return *id;
}

json breakdown_json(const HarmGraph& g, const HarmBreakdown& b) {
  json levels = json::array();
  for (const auto& lvl : b.levels) {
    levels.push_back({{"m", lvl.level},
                      {"size", count_json(lvl.size)},
                      {"distinct", lvl.distinct},
                      {"x", optional_json(lvl.value)},
                      {"weighted", optional_json(lvl.weighted)}});
  }
  return {{"target", g.label(b.target)}, {"H", b.harm}, {"m_max", b.m_max}, {"levels", levels}};
}

json report_json(const InfluenceReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries) entries.push_back({{"node", e.label}, {"score", e.score}});
  return {{"kind", std::string(to_string(report.kind))}, {"config", config_json(report.config)}, {"entries", entries}};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    if (end > start) parts.emplace_back(path.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

struct Session {
  std::mutex mutex;
  std::shared_ptr<const HarmGraph> graph;
  NodeId target;
  HarmConfig config;
  ScenarioOverlay overlay;
  double baseline = 0.0;
  double current = 0.0;
  Clock::time_point last_used;
};

struct Job {
  enum class State { Running, Done, Failed };
  State state = State::Running;
  Response result;
  Clock::time_point finished;
};

// Fixed pool running ranking jobs.
class JobRunner {
 public:
  explicit JobRunner(unsigned workers) {
    for (unsigned i = 0; i < std::max(1u, workers); ++i) {
      threads_.emplace_back([this](std::stop_token stop) { work(stop); });
    }
  }
  ~JobRunner() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
  }

  void submit(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

 private:
  void work(std::stop_token) {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::vector<std::jthread> threads_;
};

}  // namespace

struct Service::Impl {
  Options options;
  mutable std::mutex graph_mutex;
  std::shared_ptr<const HarmGraph> graph;

  mutable std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_session = 1;

  std::mutex jobs_mutex;
  std::condition_variable jobs_cv;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::uint64_t next_job = 1;

  // Declared last so its workers stop before the state they use goes away.
  JobRunner runner;

  explicit Impl(Options opts) : options(std::move(opts)), runner(options.workers) {
    if (!options.clock) options.clock = [] { return Clock::now(); };
  }

  std::shared_ptr<const HarmGraph> current_graph() const {
    std::lock_guard lock(graph_mutex);
    return graph;
  }

  std::shared_ptr<const HarmGraph> require_graph() const {
    auto g = current_graph();
    if (!g) fail(503, "NotLoaded", "no graph loaded yet");
    return g;
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "UnknownSession", "unknown or expired session '" + id + "'");
    return it->second;
  }

  static json session_json(const std::string& id, const Session& s) {
    const auto& g = *s.graph;
    json overrides = json::object();
    for (const auto& [node, harm] : s.overlay.harm_overrides) overrides[g.label(node)] = harm.value();
    json removed = json::array();
    for (NodeId node : s.overlay.removed_nodes) removed.push_back(g.label(node));
    return {{"id", id},
            {"target", g.label(s.target)},
            {"config", config_json(s.config)},
            {"overrides", overrides},
            {"removed", removed},
            {"baseline", s.baseline},
            {"H", s.current},
            {"delta", s.current - s.baseline}};
  }

  static void rescore(Session& s) { s.current = scored_with(*s.graph, s.overlay, s.target, s.config); }

  Response health() {
    auto g = current_graph();
    json body{{"version", NETHARM_VERSION}, {"status", g ? "ok" : "loading"}};
    if (g) {
      body["nodes"] = g->node_count();
      body["edges"] = g->edge_count();
    }
    return {g ? 200 : 503, body.dump()};
  }

  Response score(std::string_view raw) {
    auto g = require_graph();
    const auto body = parse_body(raw);
    FieldErrors errors;
    const auto label = required_string(body, "target", errors);
    const auto cfg = parse_config(body.value("config", json(nullptr)), "config", errors);
    check_fields(errors);
    const NodeId target = node_or_404(*g, label);
    return {200, breakdown_json(*g, evaluate_network_harm(*g, target, cfg)).dump()};
  }

  Response open_session(std::string_view raw) {
    auto g = require_graph();
    const auto body = parse_body(raw);
    FieldErrors errors;
    const auto label = required_string(body, "target", errors);
    const auto cfg = parse_config(body.value("config", json(nullptr)), "config", errors);
    check_fields(errors);
    auto s = std::make_shared<Session>();
    s->graph = g;
    s->target = node_or_404(*g, label);
    s->config = cfg;
    s->baseline = network_harm(*g, s->target, cfg);
    s->current = s->baseline;
    s->last_used = options.clock();
    std::string id;
    {
      std::lock_guard lock(sessions_mutex);
      id = "s" + std::to_string(next_session++);
      sessions.emplace(id, s);
    }
    return {201, session_json(id, *s).dump()};
  }

  Response session_request(std::string_view method, const std::vector<std::string>& parts, std::string_view raw) {
    // parts: api session <id> [action [node]]
    const std::string& id = parts[2];
    if (method == "DELETE" && parts.size() == 3) {
      std::lock_guard lock(sessions_mutex);
      if (sessions.erase(id) == 0) fail(404, "UnknownSession", "unknown or expired session '" + id + "'");
      return {204, ""};
    }
    auto s = find_session(id);
    std::lock_guard lock(s->mutex);
    s->last_used = options.clock();
    const auto& g = *s->graph;

    if (parts.size() == 3) {
      if (method != "GET") fail(405, "MethodNotAllowed", "use GET or DELETE on a session");
      return {200, session_json(id, *s).dump()};
    }
    const std::string& action = parts[3];
    if (method == "POST" && parts.size() == 4 && action == "override") {
      const auto body = parse_body(raw);
      FieldErrors errors;
      const auto label = required_string(body, "node", errors);
      double harm = 0.0;
      if (!body.contains("harm")) {
        errors["harm"] = "is required";
      } else if (!body["harm"].is_number()) {
        errors["harm"] = "must be a number";
      } else {
        harm = body["harm"].get<double>();
        if (!(harm >= HarmScore::kMin && harm <= HarmScore::kMax)) errors["harm"] = "must be in [0, 100]";
      }
      check_fields(errors);
      const NodeId node = node_or_404(g, label);
      if (s->overlay.removed_nodes.contains(node)) {
        fail(409, "Conflict", "node '" + label + "' is removed; restore it before overriding its harm");
      }
      auto previous = s->overlay.harm_overrides;
      s->overlay.harm_overrides.insert_or_assign(node, HarmScore(harm));
      try {
        rescore(*s);
      } catch (...) {
        s->overlay.harm_overrides = std::move(previous);
        throw;
      }
      return {200, session_json(id, *s).dump()};
    }
    if (method == "POST" && parts.size() == 4 && action == "remove") {
      const auto body = parse_body(raw);
      FieldErrors errors;
      const auto label = required_string(body, "node", errors);
      check_fields(errors);
      const NodeId node = node_or_404(g, label);
      if (node == s->target) fail(400, "InvalidOverlay", "the session target cannot be removed", {{"node", "is the target"}});
      if (s->overlay.harm_overrides.contains(node)) {
        fail(409, "Conflict", "node '" + label + "' has a harm override; clear it before removing the node");
      }
      s->overlay.removed_nodes.insert(node);
      try {
        rescore(*s);
      } catch (...) {
        s->overlay.removed_nodes.erase(node);
        throw;
      }
      return {200, session_json(id, *s).dump()};
    }
    if (method == "DELETE" && parts.size() == 5 && (action == "override" || action == "remove")) {
      const NodeId node = node_or_404(g, parts[4]);
      const bool changed = action == "override" ? s->overlay.harm_overrides.erase(node) > 0
                                                : s->overlay.removed_nodes.erase(node) > 0;
      if (!changed) fail(404, "NotInScenario", "node '" + parts[4] + "' has no " + action + " in this session");
      rescore(*s);
      return {200, session_json(id, *s).dump()};
    }
    if (method == "POST" && parts.size() == 4 && action == "reset") {
      s->overlay = {};
      s->current = s->baseline;
      return {200, session_json(id, *s).dump()};
    }
    if (method == "PUT" && parts.size() == 4 && action == "config") {
      const auto body = parse_body(raw);
      FieldErrors errors;
      const auto cfg = parse_config(body.value("config", json(nullptr)), "config", errors);
      check_fields(errors);
      const double baseline = network_harm(g, s->target, cfg);
      const double current = scored_with(g, s->overlay, s->target, cfg);
      s->config = cfg;
      s->baseline = baseline;
      s->current = current;
      return {200, session_json(id, *s).dump()};
    }
    fail(404, "NotFound", "no such session endpoint");
  }

  Response rankings(std::string_view raw) {
    auto g = require_graph();
    const auto body = parse_body(raw);
    FieldErrors errors;
    const auto kind_text = required_string(body, "kind", errors);
    const auto kind = parse_report_kind(kind_text);
    if (errors.empty() && !kind) errors["kind"] = "expected vulnerability, influence or global";
    const auto cfg = parse_config(body.value("config", json(nullptr)), "config", errors);
    std::size_t top_n = 10;
    if (body.contains("top_n")) {
      if (!body["top_n"].is_number_integer() || body["top_n"].get<long long>() < 0) {
        errors["top_n"] = "must be a non-negative integer";
      } else {
        top_n = body["top_n"].get<std::size_t>();
      }
    }
    std::optional<NodeId> target;
    std::string target_label;
    if (kind && *kind != ReportKind::GlobalInfluence) target_label = required_string(body, "target", errors);
    check_fields(errors);
    if (!target_label.empty()) target = node_or_404(*g, target_label);
    validate_or_400(cfg);

    auto job = std::make_shared<Job>();
    std::string job_id;
    {
      std::lock_guard lock(jobs_mutex);
      job_id = "j" + std::to_string(next_job++);
      jobs.emplace(job_id, job);
    }
    runner.submit([this, job, g, target, k = *kind, cfg, top_n] {
      Response r;
      try {
        auto report = rank_report(*g, target, k, cfg, top_n, 1);
        auto doc = report_json(report);
        if (target) doc["target"] = g->label(*target);
        r = {200, doc.dump()};
      } catch (const Error& e) {
        r = {status_for(e.code()), error_body(std::string(to_string(e.code())), e.what(), {}).dump()};
      } catch (const std::exception& e) {
        r = {500, error_body("Internal", e.what(), {}).dump()};
      }
      {
        std::lock_guard lock(jobs_mutex);
        job->result = std::move(r);
        job->state = job->result.status == 200 ? Job::State::Done : Job::State::Failed;
        job->finished = options.clock();
      }
      jobs_cv.notify_all();
    });

    std::unique_lock lock(jobs_mutex);
    jobs_cv.wait_for(lock, options.ranking_timeout, [&] { return job->state != Job::State::Running; });
    if (job->state == Job::State::Running) {
      return {202, json{{"job", job_id}, {"status", "running"}}.dump(), "application/json",
              {{"Location", "/api/jobs/" + job_id}}};
    }
    return job->result;
  }

  static void validate_or_400(const HarmConfig& cfg) {
    try {
      validate(cfg);
    } catch (const Error& e) {
      fail(400, std::string(to_string(e.code())), e.what());
    }
  }

  Response job_status(const std::string& id) {
    std::lock_guard lock(jobs_mutex);
    auto it = jobs.find(id);
    if (it == jobs.end()) fail(404, "UnknownJob", "unknown job '" + id + "'");
    const auto& job = *it->second;
    if (job.state == Job::State::Running) return {202, json{{"job", id}, {"status", "running"}}.dump()};
    return job.result;
  }

  Response dispatch(std::string_view method, std::string_view path, std::string_view body) {
    const auto parts = split_path(path);
    if (parts.empty() || parts[0] != "api") fail(404, "NotFound", "unknown path");
    if (parts.size() == 2 && parts[1] == "health" && method == "GET") return health();
    if (parts.size() == 2 && parts[1] == "graph" && method == "GET") {
      auto g = require_graph();
      auto doc = graph_to_json(*g);
      doc["node_count"] = g->node_count();
      doc["edge_count"] = g->edge_count();
      return {200, doc.dump()};
    }
    if (parts.size() == 2 && parts[1] == "score" && method == "POST") return score(body);
    if (parts.size() == 2 && parts[1] == "session" && method == "POST") return open_session(body);
    if (parts.size() >= 3 && parts[1] == "session") return session_request(method, parts, body);
    if (parts.size() == 2 && parts[1] == "rankings" && method == "POST") return rankings(body);
    if (parts.size() == 3 && parts[1] == "jobs" && method == "GET") return job_status(parts[2]);
    fail(404, "NotFound", "no endpoint for " + std::string(method) + " " + std::string(path));
  }
};

Service::Service(Options options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Service::~Service() = default;

void Service::load(HarmGraph graph) {
  auto g = std::make_shared<const HarmGraph>(std::move(graph));
  std::lock_guard lock(impl_->graph_mutex);
  impl_->graph = std::move(g);
}

bool Service::loaded() const { return impl_->current_graph() != nullptr; }

std::size_t Service::expire_sessions() {
  const auto now = impl_->options.clock();
  const auto limit = impl_->options.session_timeout;
  std::size_t dropped = 0;
  {
    std::lock_guard lock(impl_->sessions_mutex);
    for (auto it = impl_->sessions.begin(); it != impl_->sessions.end();) {
      // A session busy with a request is in use by definition.
      bool idle = false;
      {
        std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
        idle = session_lock.owns_lock() && now - it->second->last_used > limit;
      }
      if (idle) {
        it = impl_->sessions.erase(it);
        ++dropped;
      } else {
        ++it;
      }
    }
  }
  std::lock_guard lock(impl_->jobs_mutex);
  std::erase_if(impl_->jobs, [&](const auto& entry) {
    return entry.second->state != Job::State::Running && now - entry.second->finished > limit;
  });
  return dropped;
}

std::size_t Service::session_count() const {
  std::lock_guard lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

Response Service::handle(std::string_view method, std::string_view target, std::string_view body) {
  const auto query = target.find('?');
  const auto path = target.substr(0, query);
  Response r;
  if (method == "OPTIONS") {
    r = {204, ""};
  } else {
    expire_sessions();
    try {
      r = impl_->dispatch(method, path, body);
    } catch (const HttpError& e) {
      r = {e.status, error_body(e.code, e.message, e.fields).dump()};
    } catch (const Error& e) {
      r = {status_for(e.code()), error_body(std::string(to_string(e.code())), e.what(), {}).dump()};
    } catch (const std::exception& e) {
      r = {500, error_body("Internal", e.what(), {}).dump()};
    }
  }
  r.headers.emplace_back("Access-Control-Allow-Origin", impl_->options.cors_origin);
  r.headers.emplace_back("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
  r.headers.emplace_back("Access-Control-Allow-Headers", "Content-Type");
  r.headers.emplace_back("X-Netharm-Version", NETHARM_VERSION);
  return r;
}

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      auto r = service.handle(req.method, req.target, req.body);
      res.status = r.status;
      for (const auto& [k, v] : r.headers) res.set_header(k, v);
      if (!r.body.empty()) res.set_content(r.body, r.content_type);
    };
    const char* pattern = R"(/.*)";
    server.Get(pattern, forward);
    server.Post(pattern, forward);
    server.Put(pattern, forward);
    server.Delete(pattern, forward);
    server.Options(pattern, forward);
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace netharm::service
