// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace neuroflow::validator {

enum class ConstraintKind {
  REQUIRED_SUBSTRING,
  /// ECMAScript regex searched anywhere in the script.
  REQUIRED_FILENAME_PATTERN,
  /// Both tokens must appear (e.g. "dir-AP" and "dir-PA").
  REQUIRED_PAIR,
  FORBIDDEN_SUBSTRING,
};

struct Constraint {
  ConstraintKind kind = ConstraintKind::REQUIRED_SUBSTRING;
  std::string value;
  std::string second;  // REQUIRED_PAIR only
  std::string label;   // human readable name for reports
};

struct ConstraintCase {
  std::vector<Constraint> constraints;
};

struct ConstraintResult {
  std::string label;
  bool passed = false;
};

std::vector<ConstraintResult> check_step_constraints(std::string_view script_text,
                                                     const ConstraintCase& c);

Constraint constraint_from_json(const nlohmann::json& j);
ConstraintCase constraint_case_from_json(const nlohmann::json& j);

}  // namespace neuroflow::validator
