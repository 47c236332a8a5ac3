// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/gateway/service.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace neuroflow::gateway {

inline constexpr const char* kDefaultHost = "127.0.0.1";

/// HTTP binding of WorkflowService under /api/v1. No authentication: bind to loopback.
class Server {
 public:
  explicit Server(GatewayOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind(int port, const std::string& host = kDefaultHost);
  /// Serves on the calling thread until stop().
  void listen();
  /// Serves on a background thread.
  void start();
  /// Stops runs and the listener; safe to call more than once.
  void stop();

  int port() const { return port_; }
  WorkflowService& service() { return service_; }

 private:
  void routes();

  WorkflowService service_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = -1;
};

/// Long-running service: binds loopback, serves until SIGINT or SIGTERM.
void serve(int port, const std::filesystem::path& workspace_root, GatewayOptions options = {});

}  // namespace neuroflow::gateway
