// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/executor/step_runner.hpp"
#include "neuroflow/graph/graph.hpp"
#include "neuroflow/planner/intent.hpp"
#include "neuroflow/registry/registry.hpp"
#include "neuroflow/toolkit/catalog.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace neuroflow::executor {

enum class GenerationMode { TEMPLATE, MODEL };

struct RunConfig {
  std::filesystem::path workspace_root;
  std::filesystem::path data_root;
  /// Empty paths select the bundled defaults.
  std::filesystem::path catalog_path;
  std::filesystem::path dependencies_path;
  std::filesystem::path mock_manifest_path;
  bool use_mocks = true;
  /// Binary that implements `mock-tool`, `integrate` and `task`.
  std::filesystem::path runner;

  planner::BackendConfig backend;
  GenerationMode mode = GenerationMode::TEMPLATE;
  int max_exec_retries = kDefaultMaxExecRetries;
  /// Overrides every step's timeout when set.
  std::optional<double> step_timeout;
  /// 0 selects the number of modalities in the graph.
  int parallelism = 0;
  std::vector<std::string> env_allowlist{"HOME", "LANG", "TMPDIR"};

  /// Escalations are approved automatically (provenance still records the override).
  bool approve_all = false;
  /// Block on pending approvals, polling for decisions, instead of returning.
  bool wait_for_approvals = false;
  /// Explicit id; generated when empty.
  std::string workflow_id;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Crash injection for resumability tests.
struct InterruptPlan {
  /// Stop right after this many step completions in the current session.
  std::optional<int> after_completions;
  /// Kill the run while this step is executing, leaving it RUNNING on disk.
  std::optional<std::string> while_running;
};

struct RunResult {
  std::string workflow_id;
  std::filesystem::path workflow_dir;
  registry::WorkflowPhase phase = registry::WorkflowPhase::DISTRIBUTION;
  bool interrupted = false;
  /// Stopped with escalations pending and no way to decide them.
  bool blocked_on_approval = false;
  std::optional<planner::ParseOutcome> parse;
  std::string message;

  bool done() const { return phase == registry::WorkflowPhase::DONE; }
};

std::string new_workflow_id();

class WorkflowRunner {
 public:
  explicit WorkflowRunner(RunConfig config, std::shared_ptr<planner::ChatBackend> chat = nullptr);
  ~WorkflowRunner();

  /// Parse the prompt, plan, create the registry and run to completion (or a stop condition).
  RunResult start(const std::string& prompt, const InterruptPlan& interrupt = {});
  /// Plan from an already parsed intent (skips the planner backend).
  RunResult start_with_intent(const std::string& prompt, const planner::ParseOutcome& parse,
                              const InterruptPlan& interrupt = {});
  /// Re-open an existing workflow, refuse on plan change, and continue.
  RunResult resume(const std::string& workflow_id, const InterruptPlan& interrupt = {});

  /// Cooperative stop; running steps are killed and left RUNNING.
  void request_stop() { stop_.store(true); }

  /// Registry of the workflow being run (null before start/resume).
  registry::Registry* registry() { return registry_.get(); }
  /// Same registry, safe to read from other threads while start/resume runs (null until created).
  registry::Registry* live_registry() const { return live_.load(); }
  const RunConfig& config() const { return config_; }

 private:
  struct Plan;
  RunResult execute(Plan& plan, const InterruptPlan& interrupt);
  std::unique_ptr<Plan> make_plan(const planner::WorkflowIntent& intent);

  RunConfig config_;
  std::shared_ptr<planner::ChatBackend> chat_;
  std::unique_ptr<registry::Registry> registry_;
  std::atomic<bool> stop_{false};
  std::atomic<registry::Registry*> live_{nullptr};
};

/// Rebuilds the graph for a recorded workflow from its stored config (used by status views).
graph::StepGraph rebuild_graph(const registry::WorkflowRecord& record);

}  // namespace neuroflow::executor
