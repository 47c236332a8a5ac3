// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/validator/schema.hpp"

#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/validator/nifti.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <set>
#include <sstream>

namespace neuroflow::validator {

namespace fs = std::filesystem;
using nlohmann::json;

void check_relative_pattern(const std::string& pattern) {
  if (pattern.empty()) throw ConfigError("empty path pattern");
  if (pattern.front() == '/' || pattern.front() == '\\')
    throw ConfigError("path pattern must be relative: " + pattern);
  if (pattern.find('\0') != std::string::npos)
    throw ConfigError("path pattern contains NUL");
  std::size_t start = 0;
  while (start <= pattern.size()) {
    auto end = pattern.find_first_of("/\\", start);
    if (end == std::string::npos) end = pattern.size();
    if (pattern.compare(start, end - start, "..") == 0)
      throw ConfigError("path pattern escapes its root: " + pattern);
    start = end + 1;
  }
}

bool glob_match(const std::string& pattern, const std::string& relative_path) {
  return ::fnmatch(pattern.c_str(), relative_path.c_str(), FNM_PATHNAME) == 0;
}

OutputSchema schema_from_json(const std::string& schema_id, const json& j) {
  OutputSchema s;
  s.schema_id = schema_id;
  s.required_paths = j.value("required", std::vector<std::string>{});
  s.forbidden_paths = j.value("forbidden", std::vector<std::string>{});
  s.closed_world = j.value("closed_world", false);
  for (const auto& p : s.required_paths) check_relative_pattern(p);
  for (const auto& p : s.forbidden_paths) check_relative_pattern(p);
  if (j.contains("nifti")) {
    for (const auto& n : j.at("nifti")) {
      NiftiConstraint c;
      c.min_dims = n.value("min_dims", 1);
      c.max_dims = n.value("max_dims", 7);
      c.datatypes = n.value("datatypes", std::vector<int>{});
      const auto pattern = n.at("pattern").get<std::string>();
      check_relative_pattern(pattern);
      s.nifti_checks.emplace_back(pattern, c);
    }
  }
  if (j.contains("min_bytes")) {
    for (const auto& [pattern, bytes] : j.at("min_bytes").items()) {
      check_relative_pattern(pattern);
      s.min_file_bytes[pattern] = bytes.get<std::uintmax_t>();
    }
  }
  return s;
}

json to_json(const OutputSchema& s) {
  json nifti = json::array();
  for (const auto& [pattern, c] : s.nifti_checks)
    nifti.push_back({{"pattern", pattern},
                     {"min_dims", c.min_dims},
                     {"max_dims", c.max_dims},
                     {"datatypes", c.datatypes}});
  json min_bytes = json::object();
  for (const auto& [p, b] : s.min_file_bytes) min_bytes[p] = b;
  return {{"required", s.required_paths},
          {"forbidden", s.forbidden_paths},
          {"nifti", nifti},
          {"min_bytes", min_bytes},
          {"closed_world", s.closed_world}};
}

ValidationReport validate_tree(const fs::path& root, const OutputSchema& schema) {
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    throw IoError("validation root is not a readable directory: " + root.string());

  std::vector<std::string> files;
  std::vector<std::string> dirs;
  fs::recursive_directory_iterator it(root, fs::directory_options::none, ec);
  if (ec) throw IoError("cannot read " + root.string() + ": " + ec.message());
  for (const auto& entry : it) {
    const std::string rel = relative_generic(entry.path(), root);
    if (entry.is_directory(ec))
      dirs.push_back(rel);
    else
      files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::sort(dirs.begin(), dirs.end());

  ValidationReport report;
  report.schema_id = schema.schema_id;

  std::set<std::string> required_sorted(schema.required_paths.begin(),
                                        schema.required_paths.end());
  for (const auto& pattern : required_sorted) {
    const bool hit =
        std::any_of(files.begin(), files.end(), [&](const auto& f) { return glob_match(pattern, f); }) ||
        std::any_of(dirs.begin(), dirs.end(), [&](const auto& d) { return glob_match(pattern, d); });
    if (!hit) report.missing.push_back(pattern);
  }

  std::set<std::string> unexpected;
  for (const auto& f : files) {
    for (const auto& pattern : schema.forbidden_paths)
      if (glob_match(pattern, f)) unexpected.insert(f);
    if (schema.closed_world) {
      auto declared = [&](const std::string& p) { return glob_match(p, f); };
      bool known = std::any_of(schema.required_paths.begin(), schema.required_paths.end(), declared);
      for (const auto& [p, c] : schema.nifti_checks) known = known || declared(p);
      for (const auto& [p, b] : schema.min_file_bytes) known = known || declared(p);
      if (!known) unexpected.insert(f);
    }
  }
  report.unexpected.assign(unexpected.begin(), unexpected.end());

  std::map<std::string, std::string> failures;  // path -> first reason, sorted by path
  for (const auto& f : files) {
    for (const auto& [pattern, constraint] : schema.nifti_checks) {
      if (!glob_match(pattern, f) || failures.contains(f)) continue;
      try {
        const NiftiHeader h = read_nifti_header(root / f);
        if (h.ndim() < constraint.min_dims || h.ndim() > constraint.max_dims) {
          failures[f] = "expected " + std::to_string(constraint.min_dims) + ".." +
                        std::to_string(constraint.max_dims) + " dimensions, found " +
                        std::to_string(h.ndim());
        } else if (!constraint.datatypes.empty() &&
                   std::find(constraint.datatypes.begin(), constraint.datatypes.end(),
                             h.datatype) == constraint.datatypes.end()) {
          failures[f] = "unexpected datatype " + std::to_string(h.datatype);
        }
      } catch (const NiftiError& e) {
        failures[f] = e.what();
      }
    }
    for (const auto& [pattern, min_bytes] : schema.min_file_bytes) {
      if (!glob_match(pattern, f) || failures.contains(f)) continue;
      const auto size = fs::file_size(root / f, ec);
      if (ec || size < min_bytes)
        failures[f] = "file is " + std::to_string(ec ? 0 : size) + " bytes, minimum " +
                      std::to_string(min_bytes);
    }
  }
  report.header_failures.assign(failures.begin(), failures.end());

  const bool invalid =
      !report.missing.empty() || !report.unexpected.empty() || !report.header_failures.empty();
  report.status = invalid ? ReportStatus::INVALID : ReportStatus::VALID;
  if (invalid) {
    std::ostringstream fb;
    fb << "Output of step schema '" << schema.schema_id << "' is structurally invalid:\n";
    for (const auto& m : report.missing)
      fb << "- missing required output matching '" << m << "'\n";
    for (const auto& [path, reason] : report.header_failures)
      fb << "- invalid file '" << path << "': " << reason << "\n";
    for (const auto& u : report.unexpected) fb << "- unexpected path '" << u << "'\n";
    fb << "Regenerate the step so that every required output is produced under the output "
          "directory.";
    report.feedback = fb.str();
  }
  return report;
}

json to_json(const ValidationReport& r) {
  json failures = json::array();
  for (const auto& [path, reason] : r.header_failures)
    failures.push_back({{"path", path}, {"reason", reason}});
  return {{"schema_id", r.schema_id},
          {"status", r.valid() ? "VALID" : "INVALID"},
          {"missing", r.missing},
          {"unexpected", r.unexpected},
          {"header_failures", failures},
          {"feedback", r.feedback}};
}

}  // namespace neuroflow::validator
