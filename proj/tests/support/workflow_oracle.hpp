// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/io.hpp"
#include "neuroflow/registry/registry.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace neuroflow::testing {

/// Files under every step's out/ with the workflow directory masked, so two workflows compare equal.
inline std::map<std::string, std::string> out_trees(const std::filesystem::path& wf) {
  std::map<std::string, std::string> files;
  const std::string prefix = std::filesystem::absolute(wf).string();
  for (const auto& e : std::filesystem::recursive_directory_iterator(wf)) {
    if (!e.is_regular_file()) continue;
    const auto rel = relative_generic(e.path(), wf);
    if (rel.find("/out/") == std::string::npos) continue;
    std::string text = read_file(e.path());
    for (auto p = text.find(prefix); p != std::string::npos; p = text.find(prefix, p)) text.replace(p, prefix.size(), "<wf>");
    files[rel] = std::move(text);
  }
  return files;
}

inline std::map<std::string, std::map<std::string, std::string>> outputs_of(const registry::WorkflowRecord& r) {
  std::map<std::string, std::map<std::string, std::string>> out;
  for (const auto& [id, s] : r.steps) out[id] = s.outputs;
  return out;
}

}  // namespace neuroflow::testing
