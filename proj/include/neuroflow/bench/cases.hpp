// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/types.hpp"
#include "neuroflow/integrator/manifest.hpp"
#include "neuroflow/validator/constraints.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace neuroflow::bench {

enum class Suite { INTENT, PREPROC, INTEGRATION };

std::string_view to_string(Suite s);
/// "intent" | "preproc" | "integration"; throws ConfigError otherwise.
Suite parse_suite(std::string_view token);

/// Deliberate fault injected into a generated artifact before scoring.
struct Mutation {
  std::string find;
  std::string replace;
  /// Integration only: repeat this 0-based data row of the produced CSV.
  std::optional<std::size_t> duplicate_row;
};

/// Marks a case as a corrupted copy of `base_case` that should fail `expect_false`.
struct Corruption {
  std::string base_case;
  std::string expect_false;
};

struct IntentCase {
  std::string case_id;
  std::string prompt;
  ModalitySet gold_modalities;
  TaskSet gold_tasks;
};

struct PreprocCase {
  std::string case_id;
  /// "<modality prefix>.<step name>", e.g. "smri.recon_all".
  std::string label;
  std::vector<std::string> directory_tree;
  std::vector<std::string> expected_tool_tokens;
  std::string expected_output_root;
  validator::ConstraintCase constraints;
  /// argv with "{script}" standing for the generated file.
  std::vector<std::string> syntax_check_cmd;
  std::vector<Mutation> mutations;
  std::optional<Corruption> corruption;
};

struct IntegrationRoot {
  std::string dir;  // relative to the simulated tree root
  std::string pattern;
};

struct RequiredTriple {
  std::string subject_id;
  std::string date;
  std::string column;
};

struct IntegrationCase {
  std::string case_id;
  std::string description;
  /// Files to create, relative to the tree root.
  std::vector<std::string> simulated_tree;
  std::map<Modality, IntegrationRoot> roots;
  std::string subject_pattern = integrator::kDefaultSubjectPattern;
  integrator::JoinPolicy join = integrator::JoinPolicy::UNION;
  std::filesystem::path gold_csv;  // absolute after loading
  std::vector<RequiredTriple> required_triples;
  std::vector<Mutation> mutations;
  std::optional<Corruption> corruption;
};

IntentCase intent_case_from_json(const nlohmann::json& j);
PreprocCase preproc_case_from_json(const nlohmann::json& j);
/// Relative gold_csv paths resolve against `case_dir`.
IntegrationCase integration_case_from_json(const nlohmann::json& j, const std::filesystem::path& case_dir);

/// Every *.json directly under `dir`, sorted by file name. Throws ConfigError on a bad case.
std::vector<IntentCase> load_intent_cases(const std::filesystem::path& dir);
std::vector<PreprocCase> load_preproc_cases(const std::filesystem::path& dir);
std::vector<IntegrationCase> load_integration_cases(const std::filesystem::path& dir);

/// bench/cases/<suite> under the bundled bench directory.
std::filesystem::path default_cases_dir(Suite s);
/// bench/cases/corrupted/<suite>.
std::filesystem::path default_corrupted_dir(Suite s);

}  // namespace neuroflow::bench
