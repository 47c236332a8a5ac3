// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace neuroflow::gateway {

/// Resolves a request path against a workflow directory. Throws ApiException with 400 for absolute
/// paths, `..` or empty components, backslashes, NUL bytes and symlinks that leave the directory;
/// 404 when nothing exists there. The result is canonical and always inside `workflow_dir`.
std::filesystem::path resolve_artifact(const std::filesystem::path& workflow_dir, std::string_view relpath);

/// Content type by extension; unknown types are served as application/octet-stream.
std::string artifact_content_type(const std::filesystem::path& path);

}  // namespace neuroflow::gateway
