// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace neuroflow::validator {

struct NiftiConstraint {
  int min_dims = 1;
  int max_dims = 7;
  /// Empty means any datatype.
  std::vector<int> datatypes;
};

struct OutputSchema {
  std::string schema_id;
  std::vector<std::string> required_paths;
  std::vector<std::string> forbidden_paths;
  std::vector<std::pair<std::string, NiftiConstraint>> nifti_checks;
  std::map<std::string, std::uintmax_t> min_file_bytes;
  /// When set, files matched by no declared pattern are reported as unexpected.
  bool closed_world = false;
};

enum class ReportStatus { VALID, INVALID };

struct ValidationReport {
  std::string schema_id;
  ReportStatus status = ReportStatus::VALID;
  std::vector<std::string> missing;
  std::vector<std::string> unexpected;
  std::vector<std::pair<std::string, std::string>> header_failures;
  std::string feedback;

  bool valid() const { return status == ReportStatus::VALID; }
};

/// Throws ConfigError for absolute patterns, empty patterns, or ".." segments.
void check_relative_pattern(const std::string& pattern);

/// Glob match of a relative path; '*' and '?' never cross '/'.
bool glob_match(const std::string& pattern, const std::string& relative_path);

OutputSchema schema_from_json(const std::string& schema_id, const nlohmann::json& j);
nlohmann::json to_json(const OutputSchema& schema);

/// Read-only structural check of `root`. Throws IoError if root is missing or unreadable.
ValidationReport validate_tree(const std::filesystem::path& root, const OutputSchema& schema);

nlohmann::json to_json(const ValidationReport& report);

}  // namespace neuroflow::validator
