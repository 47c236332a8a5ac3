// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/gateway/artifacts.hpp"
#include "neuroflow/common/types.hpp"
#include "neuroflow/gateway/api.hpp"

#include <algorithm>
#include <map>
#include <system_error>

namespace neuroflow::gateway {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void traversal(const std::string& why) { throw ApiException(400, "path_traversal", why); }

bool contains(const fs::path& root, const fs::path& p) {
  auto r = root.begin();
  auto q = p.begin();
  for (; r != root.end(); ++r, ++q)
    if (q == p.end() || *r != *q) return false;
  return true;
}

}  // namespace

fs::path resolve_artifact(const fs::path& workflow_dir, std::string_view relpath) {
  if (relpath.empty()) throw ApiException(400, "bad_path", "artifact path is empty");
  if (relpath.find('\0') != std::string_view::npos) traversal("artifact path contains a NUL byte");
  if (relpath.find('\\') != std::string_view::npos) traversal("artifact path contains a backslash");
  if (relpath.front() == '/') traversal("artifact path must be relative");
  for (std::size_t start = 0;;) {
    const auto end = relpath.find('/', start);
    const auto part = relpath.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (part.empty() || part == "." || part == "..")
      traversal("artifact path has an empty, '.' or '..' component");
    if (end == std::string_view::npos) break;
    start = end + 1;
  }

  std::error_code ec;
  const fs::path root = fs::canonical(workflow_dir, ec);
  if (ec) throw ApiException(404, "not_found", "workflow directory is missing");
  const fs::path resolved = fs::canonical(root / fs::path(std::string(relpath)), ec);
  if (ec) throw ApiException(404, "not_found", "no artifact " + std::string(relpath));
  if (!contains(root, resolved)) traversal("artifact path resolves outside the workflow directory");
  if (!fs::is_regular_file(resolved, ec)) throw ApiException(400, "not_a_file", std::string(relpath) + " is not a file");
  return resolved;
}

std::string artifact_content_type(const fs::path& path) {
  static const std::map<std::string, std::string> types{
      {".json", "application/json"}, {".jsonl", "application/x-ndjson"}, {".csv", "text/csv"},
      {".tsv", "text/tab-separated-values"}, {".txt", "text/plain"}, {".log", "text/plain"},
      {".svg", "image/svg+xml"}, {".png", "image/png"}};
  const auto it = types.find(to_lower(path.extension().string()));
  return it == types.end() ? "application/octet-stream" : it->second;
}

}  // namespace neuroflow::gateway
