// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace neuroflow::graph {

enum class StepPhase { INGEST, PREPROCESS, INTEGRATE, TASK };

inline std::string_view to_string(StepPhase p) {
  switch (p) {
    case StepPhase::INGEST: return "INGEST";
    case StepPhase::PREPROCESS: return "PREPROCESS";
    case StepPhase::INTEGRATE: return "INTEGRATE";
    case StepPhase::TASK: return "TASK";
  }
  return "?";
}

inline std::optional<StepPhase> parse_step_phase(std::string_view s) {
  for (StepPhase p : {StepPhase::INGEST, StepPhase::PREPROCESS, StepPhase::INTEGRATE, StepPhase::TASK})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

struct StepNode {
  std::string step_id;  // "<modality>.<step_name>"
  std::optional<Modality> modality;  // empty for INTEGRATE / TASK nodes
  std::string tool_id;
  std::vector<std::string> depends_on;
  std::string output_schema_id;
  StepPhase phase = StepPhase::PREPROCESS;

  /// Step parameters declared by the template (merged over tool defaults at generation).
  std::map<std::string, std::string> params;
  /// Set on the step that carries cross-modality prerequisites.
  bool cross_modality_anchor = false;
  /// TASK nodes only.
  std::optional<DownstreamTask> task;
  /// Per-step override of the tool timeout, seconds.
  std::optional<double> timeout_seconds;
};

}  // namespace neuroflow::graph
