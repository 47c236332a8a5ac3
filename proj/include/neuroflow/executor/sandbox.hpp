// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/error.hpp"

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace neuroflow::executor {

inline constexpr std::size_t kTailBytes = 64 * 1024;

struct SandboxSpec {
  /// argv[0] is resolved on PATH when it has no slash.
  std::vector<std::string> argv;
  std::filesystem::path cwd;
  /// Variables copied from the parent environment; PATH is always passed.
  std::vector<std::string> env_allowlist;
  double timeout_seconds = 3600.0;
  std::filesystem::path stdout_log;
  std::filesystem::path stderr_log;
  std::size_t tail_bytes = kTailBytes;
  /// When set and raised, the child's process group is killed.
  const std::atomic<bool>* cancel = nullptr;
};

struct ExecutionResult {
  /// Exit status, or 128 + signal when the child was killed by a signal.
  int exit_code = 0;
  std::string stdout_tail;
  std::string stderr_tail;
  double wall_seconds = 0.0;
  bool timed_out = false;
  bool cancelled = false;
  /// Terminating signal, 0 when the child exited normally.
  int term_signal = 0;
};

/// The child could not be started at all (distinct from a nonzero exit).
class SpawnError : public Error {
 public:
  using Error::Error;
};

/// Runs argv in its own process group with cwd and a restricted environment. Full
/// stdout/stderr go to the log files; the result keeps the last tail_bytes of each.
ExecutionResult sandbox_exec(const SandboxSpec& spec);

}  // namespace neuroflow::executor
