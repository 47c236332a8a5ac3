// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace neuroflow::gateway {

inline constexpr double kMaxPollSeconds = 25.0;

struct GatewayOptions {
  std::filesystem::path workspace_root;
  /// Binary implementing the mock tools and builtin steps; required for mock runs.
  std::filesystem::path runner;
  /// RunConfig defaults; a submission's `config` object is merge-patched over them.
  nlohmann::json defaults = nlohmann::json::object();
  double max_poll_seconds = kMaxPollSeconds;
  double poll_interval_seconds = 0.05;
};

/// The endpoint logic without HTTP. Every read comes from registry.json, events.jsonl and
/// graph.json; mutations of a workflow this service is running go through that run's registry.
class WorkflowService {
 public:
  explicit WorkflowService(GatewayOptions options);
  ~WorkflowService();
  WorkflowService(const WorkflowService&) = delete;
  WorkflowService& operator=(const WorkflowService&) = delete;

  /// {prompt, data_root, config?} -> {workflow_id}; returns once registry.json exists.
  nlohmann::json submit(const nlohmann::json& body);
  nlohmann::json list() const;
  nlohmann::json record(const std::string& workflow_id) const;
  /// Events with seq > since, waiting up to `timeout_seconds` (capped) for the first one.
  nlohmann::json events(const std::string& workflow_id, std::uint64_t since,
                        std::optional<double> timeout_seconds = std::nullopt) const;
  nlohmann::json graph(const std::string& workflow_id) const;
  /// `status` is pending, approved, rejected or retry; empty lists every request.
  nlohmann::json approvals(const std::string& status = {}) const;
  /// {decision: approve|reject|retry, note?} -> the updated request.
  nlohmann::json decide(const std::string& approval_id, const nlohmann::json& body);
  /// -> {resumed: true, skipped: [completed step ids]}
  nlohmann::json resume(const std::string& workflow_id);
  std::filesystem::path artifact(const std::string& workflow_id, const std::string& relpath) const;

  /// True while this service has a run thread working on the workflow.
  bool active(const std::string& workflow_id) const;
  /// Blocks until no run is active.
  void wait_idle();
  /// Stops every run (steps are interrupted, resumable later) and releases pollers.
  void shutdown();

  const GatewayOptions& options() const { return options_; }

 private:
  struct Run;
  std::filesystem::path workflow_dir(const std::string& workflow_id) const;
  void launch(const std::shared_ptr<Run>& run);
  void reap_locked();

  GatewayOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::atomic<bool> stopping_{false};
};

}  // namespace neuroflow::gateway
