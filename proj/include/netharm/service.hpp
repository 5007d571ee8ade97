#pragma once

// JSON-over-HTTP facade used by the browser front end. Service holds the
// state and answers requests in-process; HttpServer puts it on a socket.

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "netharm/graph.hpp"

namespace netharm::service {

struct Options {
  std::chrono::seconds session_timeout{3600};
  // Rankings not finished within this budget are answered with 202 and a
  // job id to poll.
  std::chrono::milliseconds ranking_timeout{60'000};
  unsigned workers = 2;
  std::string cors_origin = "http://localhost:5173";
  // Injected for tests; steady_clock::now when empty.
  std::function<std::chrono::steady_clock::time_point()> clock;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::vector<std::pair<std::string, std::string>> headers;
};

class Service {
 public:
  explicit Service(Options options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Publishes a graph. Existing sessions keep the graph they were opened on.
  void load(HarmGraph graph);
  bool loaded() const;

  // `target` is the request path, optionally with a query string.
  Response handle(std::string_view method, std::string_view target, std::string_view body);

  // Drops sessions idle for longer than the timeout; returns how many.
  std::size_t expire_sessions();
  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Port 0 picks a free port; returns the bound port. Throws BindFailure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace netharm::service
