// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/executor/generator.hpp"
#include "neuroflow/executor/sandbox.hpp"
#include "neuroflow/registry/registry.hpp"
#include "neuroflow/validator/schema.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace neuroflow::executor {

inline constexpr int kDefaultMaxExecRetries = 3;

struct ExecutionRequest {
  graph::StepNode step;
  /// Dependency step id -> absolute out/ path.
  std::map<std::string, std::filesystem::path> resolved_inputs;
  /// Step-private directory: artifact, logs, out/.
  std::filesystem::path workspace;
  /// The workflow directory; recorded output paths are relative to it.
  std::filesystem::path workflow_dir;
  std::vector<std::string> env_allowlist;
  double timeout_seconds = 3600.0;
};

enum class StepOutcome { COMPLETED, ESCALATED, INTERRUPTED };

struct StepRunResult {
  StepOutcome outcome = StepOutcome::COMPLETED;
  int attempts = 0;
  std::optional<std::string> approval_id;
  /// Context handed to each attempt, in order.
  std::vector<AttemptContext> contexts;
};

/// Generate-Execute-Validate loop for one step. Failed executions feed their stderr tail
/// into the next attempt; failed validations feed the validator's feedback. After
/// max_exec_retries failed retries an approval request is opened. A raised `cancel`
/// kills the running attempt and returns INTERRUPTED with the step left RUNNING.
StepRunResult run_step(registry::Registry& reg, const ExecutionRequest& req, ScriptGenerator& gen,
                       const validator::OutputSchema& schema, int max_exec_retries = kDefaultMaxExecRetries,
                       const std::atomic<bool>* cancel = nullptr);

/// Output map recorded for a validated step: "out" plus the first match of each required pattern.
std::map<std::string, std::string> collect_outputs(const std::filesystem::path& out_dir,
                                                   const std::filesystem::path& workflow_dir,
                                                   const validator::OutputSchema& schema);

}  // namespace neuroflow::executor
