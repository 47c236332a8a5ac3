// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/types.hpp"
#include "neuroflow/graph/step.hpp"
#include "neuroflow/validator/schema.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace neuroflow::toolkit {

using ParamMap = std::map<std::string, std::string>;

struct ToolAdapter {
  std::string tool_id;
  /// Executable looked up on PATH in real-tool mode.
  std::string binary;
  std::string command_template;
  std::vector<std::string> interpreter;
  ParamMap default_params;
  /// Parameter overrides applied one rung per retry.
  std::vector<ParamMap> fallback_ladder;
  std::string output_schema_id;
  double default_timeout = 3600.0;
  /// Runs the engine's own binary instead of a wrapped tool.
  bool builtin = false;

  /// Code-generation template used by the preprocessing benchmark.
  std::string script_template;
  /// Role name -> glob over the case's directory listing.
  std::map<std::string, std::string> bench_inputs;
};

struct StepTemplate {
  std::string name;
  std::string tool_id;
  std::vector<std::string> depends_on;  // step names within the same modality
  graph::StepPhase phase = graph::StepPhase::PREPROCESS;
  bool cross_modality_anchor = false;
  /// Name of a dataset-context flag that must hold for the step to exist ("reverse_pe_b0").
  std::string condition;
  ParamMap params;
  std::string output_schema_id;  // falls back to the tool's schema
  std::optional<double> timeout_seconds;
};

/// Where the integrator finds the per-subject artifact of a modality.
struct ManifestSource {
  std::string step_name;
  std::string pattern;  // glob relative to the step's out/ directory
};

struct ModalityTemplate {
  Modality modality = Modality::SMRI;
  std::vector<StepTemplate> steps;
  ManifestSource manifest;
};

/// Per-dataset facts read from BIDS-style sidecars.
struct SubjectContext {
  std::string subject_id;
  std::string session;
  std::string phase_encoding_direction;  // of the diffusion series
  std::optional<double> total_readout_time;
  bool reverse_pe_b0 = false;
};

struct DatasetContext {
  std::vector<SubjectContext> subjects;

  /// True when any subject has a reverse phase-encoded b=0 series.
  bool reverse_pe_b0() const;
  std::optional<double> total_readout_time() const;
  bool flag(const std::string& name) const;
};

/// Reads sub-*/ses-*/{dwi,fmap}/*.json; only PhaseEncodingDirection and TotalReadoutTime are used.
DatasetContext scan_dataset(const std::filesystem::path& data_root);

class TemplateCatalog {
 public:
  static TemplateCatalog from_json(const nlohmann::json& j);
  static TemplateCatalog load(const std::filesystem::path& path);
  static TemplateCatalog load_default();

  const ToolAdapter& tool(const std::string& tool_id) const;
  bool has_tool(const std::string& tool_id) const { return tools_.contains(tool_id); }
  const std::map<std::string, ToolAdapter>& tools() const { return tools_; }

  const validator::OutputSchema& schema(const std::string& schema_id) const;
  bool has_schema(const std::string& id) const { return schemas_.contains(id); }

  bool covers(Modality m) const { return modalities_.contains(m); }
  const ModalityTemplate& modality(Modality m) const;

  const std::string& integrate_tool() const { return integrate_tool_; }
  const std::string& task_tool() const { return task_tool_; }

  /// Content hash of everything that shapes a step: template, tool, and schema.
  std::string step_digest(const graph::StepNode& node) const;

  const nlohmann::json& source() const { return source_; }

 private:
  std::map<std::string, ToolAdapter> tools_;
  std::map<std::string, validator::OutputSchema> schemas_;
  std::map<Modality, ModalityTemplate> modalities_;
  std::string integrate_tool_ = "integrate";
  std::string task_tool_ = "task";
  nlohmann::json source_;
};

/// Expands a modality's step templates into graph nodes. Conditional steps whose flag does
/// not hold are dropped and their dependents inherit the dropped step's dependencies.
std::vector<graph::StepNode> expand_template(Modality modality, const DatasetContext& ctx,
                                             const TemplateCatalog& catalog);

/// Id of the last step of a modality chain (the node other modalities depend on).
std::string terminal_step_id(Modality modality, const DatasetContext& ctx,
                             const TemplateCatalog& catalog);

}  // namespace neuroflow::toolkit
