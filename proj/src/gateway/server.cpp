// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/gateway/server.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/gateway/api.hpp"
#include "neuroflow/gateway/artifacts.hpp"

#include <httplib.h>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <pthread.h>

namespace neuroflow::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";
constexpr std::size_t kWorkerThreads = 16;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.http_status, e.to_json()); }

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw ApiException(400, "bad_request", "request body is not valid JSON");
  return body;
}

std::uint64_t parse_seq(const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos || text.size() > 19)
    throw ApiException(400, "bad_request", "since must be a non-negative integer");
  return std::stoull(text);
}

std::optional<double> parse_timeout(const httplib::Request& req) {
  if (!req.has_param("timeout")) return std::nullopt;
  const auto text = req.get_param_value("timeout");
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !(v >= 0.0))
    throw ApiException(400, "bad_request", "timeout must be a non-negative number of seconds");
  return v;
}

/// Wraps a handler so every failure becomes an ApiError body.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const std::exception& e) {
      send_error(res, to_api_error(e));
    }
  };
}

}  // namespace

Server::Server(GatewayOptions options) : service_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  http_->new_task_queue = [] { return new httplib::ThreadPool(kWorkerThreads); };
  routes();
}

Server::~Server() { stop(); }

void Server::routes() {
  auto& s = *http_;
  auto& svc = service_;
  const std::string wf = R"(/api/v1/workflows/([^/]+))";

  s.Post("/api/v1/workflows", guarded([&svc](const auto& req, auto& res) { send_json(res, 201, svc.submit(parse_body(req))); }));
  s.Get("/api/v1/workflows", guarded([&svc](const auto&, auto& res) { send_json(res, 200, svc.list()); }));
  s.Get(wf, guarded([&svc](const auto& req, auto& res) { send_json(res, 200, svc.record(req.matches[1])); }));
  s.Get(wf + "/events", guarded([&svc](const auto& req, auto& res) {
          const std::uint64_t since = req.has_param("since") ? parse_seq(req.get_param_value("since")) : 0;
          send_json(res, 200, svc.events(req.matches[1], since, parse_timeout(req)));
        }));
  s.Get(wf + "/graph", guarded([&svc](const auto& req, auto& res) { send_json(res, 200, svc.graph(req.matches[1])); }));
  s.Post(wf + "/resume", guarded([&svc](const auto& req, auto& res) { send_json(res, 200, svc.resume(req.matches[1])); }));
  s.Get(wf + "/artifacts/(.*)", guarded([&svc](const auto& req, auto& res) {
          const auto path = svc.artifact(req.matches[1], req.matches[2]);
          res.status = 200;
          res.set_header("X-Content-Type-Options", "nosniff");
          res.set_header("Content-Security-Policy", "sandbox");
          res.set_content(read_file(path), artifact_content_type(path));
        }));
  s.Get("/api/v1/approvals", guarded([&svc](const auto& req, auto& res) {
          send_json(res, 200, svc.approvals(req.has_param("status") ? req.get_param_value("status") : ""));
        }));
  s.Post(R"(/api/v1/approvals/([^/]+))", guarded([&svc](const auto& req, auto& res) {
           send_json(res, 200, svc.decide(req.matches[1], parse_body(req)));
         }));

  // Unmatched routes and framework-level failures still answer with an ApiError.
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : res.status == 405 ? "method_not_allowed" : "http_error";
    send_error(res, {res.status, code, req.method + " " + req.path + " failed with HTTP " + std::to_string(res.status)});
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, to_api_error(e));
    } catch (...) {
      send_error(res, {500, "internal", "unknown error"});
    }
  });
}

int Server::bind(int port, const std::string& host) {
  if (port < 0 || port > 65535) throw ConfigError("port must be in [0, 65535]");
  port_ = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void Server::listen() {
  if (port_ < 0) throw ConfigError("bind before listen");
  http_->listen_after_bind();
}

void Server::start() {
  if (port_ < 0) throw ConfigError("bind before start");
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void Server::stop() {
  service_.shutdown();
  http_->stop();
  if (thread_.joinable()) thread_.join();
}

void serve(int port, const fs::path& workspace_root, GatewayOptions options) {
  options.workspace_root = workspace_root;
  // Block the shutdown signals here so the waiter thread below is the only one receiving them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Server server(std::move(options));
  const int bound = server.bind(port);
  std::cout << "neuroflow gateway listening on http://" << kDefaultHost << ":" << bound << " (workspace "
            << workspace_root.string() << ")" << std::endl;
  std::thread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // listen() also returns when the listener fails; wake the waiter so it can exit.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  server.stop();
}

}  // namespace neuroflow::gateway
