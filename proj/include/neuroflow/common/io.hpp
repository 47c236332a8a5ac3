// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace neuroflow {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
std::vector<std::uint8_t> read_bytes(const fs::path& path, std::size_t max_bytes = SIZE_MAX);

/// Write via temp file + fsync + rename so readers never observe a partial document.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Plain overwrite, creating parent directories.
void write_file(const fs::path& path, std::string_view content);

/// Append one line and fsync before returning.
void append_line_durable(const fs::path& path, std::string_view line);

std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a, used to derive deterministic seeds from names.
std::uint64_t fnv1a64(std::string_view data);

/// UTC timestamp, ISO-8601 with millisecond precision.
std::string now_iso8601();

/// Single-quote a value for a POSIX shell.
std::string shell_quote(std::string_view value);

/// Directory holding bundled tables and catalogs. NEUROFLOW_DATA_DIR overrides the build default.
fs::path default_data_dir();
fs::path default_bench_dir();

/// Search PATH for an executable; empty when absent. Absolute/relative paths are checked directly.
fs::path find_executable(std::string_view name);

/// Relative path of `path` under `root` using generic separators.
std::string relative_generic(const fs::path& path, const fs::path& root);

}  // namespace neuroflow
