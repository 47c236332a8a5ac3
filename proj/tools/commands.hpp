// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <string>

namespace neuroflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitHalted = 1;
inline constexpr int kExitUsage = 2;

/// Shared state filled by subcommand callbacks.
struct Context {
  int exit_code = kExitOk;
  std::filesystem::path self;  // this binary, used as the mock/builtin runner
};

/// Raised inside callbacks for argument problems CLI11 cannot express.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void add_pipeline_commands(CLI::App& app, Context& ctx);
void add_internal_commands(CLI::App& app, Context& ctx);
void add_bench_command(CLI::App& app, Context& ctx);
void add_stats_command(CLI::App& app, Context& ctx);
void add_stack_command(CLI::App& app, Context& ctx);
void add_serve_command(CLI::App& app, Context& ctx);

}  // namespace neuroflow::cli
