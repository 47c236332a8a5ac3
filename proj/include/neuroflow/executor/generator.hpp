// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/error.hpp"
#include "neuroflow/graph/step.hpp"
#include "neuroflow/planner/intent.hpp"
#include "neuroflow/toolkit/catalog.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace neuroflow::executor {

struct AttemptContext {
  int attempt_index = 1;
  std::optional<std::string> prior_error;
  std::optional<std::string> prior_validation_feedback;
};

/// A runnable artifact: script text executed as `interpreter... <artifact-path>`.
struct Artifact {
  std::string text;
  std::vector<std::string> interpreter;
  /// Effective parameters after defaults, step overrides and fallback rungs.
  toolkit::ParamMap params;
  planner::UsageStats usage;
};

/// Unresolved placeholder or unusable model output; counts as a failed attempt.
class GenerationError : public Error {
 public:
  using Error::Error;
};

class ScriptGenerator {
 public:
  virtual ~ScriptGenerator() = default;
  virtual Artifact generate(const graph::StepNode& step, const AttemptContext& ctx) = 0;
};

/// Where placeholder values come from. {in:<step>} is resolved only through `upstream_out`,
/// which reads the registry's recorded outputs.
struct GenerationEnv {
  const toolkit::TemplateCatalog* catalog = nullptr;
  const toolkit::DatasetContext* dataset = nullptr;
  std::filesystem::path data_root;
  std::filesystem::path runner;
  /// Mock stubs by tool id; empty in real-tool mode.
  std::map<std::string, std::filesystem::path> tool_paths;
  /// Absolute out/ directory of a completed step, or nullopt.
  std::function<std::optional<std::filesystem::path>(const std::string& step_id)> upstream_out;
  /// Workspace of the step being generated.
  std::function<std::filesystem::path(const std::string& step_id)> workspace_of;
};

/// Parameters for an attempt: tool defaults < step params < fallback rung. A rung is applied
/// only on retries that follow a runtime error, one rung per retry, the last rung repeating.
toolkit::ParamMap effective_params(const toolkit::ToolAdapter& tool, const graph::StepNode& step,
                                   const AttemptContext& ctx);

/// Expands {placeholders} in a command template; substituted values are shell-quoted.
/// `lookup` returns the list of words for a placeholder (name, argument) or nullopt.
using PlaceholderLookup =
    std::function<std::optional<std::vector<std::string>>(const std::string& name, const std::string& arg)>;
std::string expand_placeholders(const std::string& tmpl, const PlaceholderLookup& lookup);

/// Deterministic instantiation of the catalog's command template (the default mode).
class TemplateGenerator : public ScriptGenerator {
 public:
  explicit TemplateGenerator(GenerationEnv env) : env_(std::move(env)) {}
  Artifact generate(const graph::StepNode& step, const AttemptContext& ctx) override;

 private:
  GenerationEnv env_;
};

/// Asks a chat backend for the script, given the step's template, inputs and prior failure.
class ModelGenerator : public ScriptGenerator {
 public:
  ModelGenerator(GenerationEnv env, std::shared_ptr<planner::ChatBackend> backend)
      : env_(std::move(env)), backend_(std::move(backend)) {}
  Artifact generate(const graph::StepNode& step, const AttemptContext& ctx) override;

  /// The message list sent for a step attempt (exposed for inspection).
  std::vector<planner::ChatMessage> build_messages(const graph::StepNode& step, const AttemptContext& ctx,
                                                   const std::string& reference_script) const;

 private:
  GenerationEnv env_;
  std::shared_ptr<planner::ChatBackend> backend_;
};

/// First fenced code block of a model reply, or the whole reply when there is none.
std::string extract_script(const std::string& reply);

}  // namespace neuroflow::executor
