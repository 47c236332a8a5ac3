// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/validator/constraints.hpp"

#include "neuroflow/common/error.hpp"

#include <regex>

namespace neuroflow::validator {

std::vector<ConstraintResult> check_step_constraints(std::string_view script_text,
                                                     const ConstraintCase& c) {
  std::vector<ConstraintResult> out;
  out.reserve(c.constraints.size());
  const std::string text(script_text);
  for (const auto& k : c.constraints) {
    bool ok = false;
    switch (k.kind) {
      case ConstraintKind::REQUIRED_SUBSTRING:
        ok = text.find(k.value) != std::string::npos;
        break;
      case ConstraintKind::REQUIRED_FILENAME_PATTERN:
        ok = std::regex_search(text, std::regex(k.value, std::regex::ECMAScript));
        break;
      case ConstraintKind::REQUIRED_PAIR:
        ok = text.find(k.value) != std::string::npos && text.find(k.second) != std::string::npos;
        break;
      case ConstraintKind::FORBIDDEN_SUBSTRING:
        ok = text.find(k.value) == std::string::npos;
        break;
    }
    out.push_back({k.label, ok});
  }
  return out;
}

Constraint constraint_from_json(const nlohmann::json& j) {
  Constraint c;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "REQUIRED_SUBSTRING")
    c.kind = ConstraintKind::REQUIRED_SUBSTRING;
  else if (kind == "REQUIRED_FILENAME_PATTERN")
    c.kind = ConstraintKind::REQUIRED_FILENAME_PATTERN;
  else if (kind == "REQUIRED_PAIR")
    c.kind = ConstraintKind::REQUIRED_PAIR;
  else if (kind == "FORBIDDEN_SUBSTRING")
    c.kind = ConstraintKind::FORBIDDEN_SUBSTRING;
  else
    throw ConfigError("unknown constraint kind: " + kind);

  if (c.kind == ConstraintKind::REQUIRED_PAIR) {
    const auto pair = j.at("value").get<std::vector<std::string>>();
    if (pair.size() != 2) throw ConfigError("REQUIRED_PAIR needs exactly two tokens");
    c.value = pair[0];
    c.second = pair[1];
  } else {
    c.value = j.at("value").get<std::string>();
  }
  if (c.kind == ConstraintKind::REQUIRED_FILENAME_PATTERN) {
    try {
      std::regex probe(c.value, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError("invalid filename pattern '" + c.value + "': " + e.what());
    }
  }
  c.label = j.value("label", kind + ":" + c.value);
  return c;
}

ConstraintCase constraint_case_from_json(const nlohmann::json& j) {
  ConstraintCase c;
  for (const auto& item : j) c.constraints.push_back(constraint_from_json(item));
  return c;
}

}  // namespace neuroflow::validator
