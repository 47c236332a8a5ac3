// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "neuroflow/common/error.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace neuroflow::cli;
  CLI::App app{"neuroflow: multimodal neuroimaging workflow engine"};
  app.require_subcommand(1);
  Context ctx;
  std::error_code ec;
  ctx.self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (ec) ctx.self = std::filesystem::absolute(argv[0]);

  add_pipeline_commands(app, ctx);
  add_internal_commands(app, ctx);
  add_bench_command(app, ctx);
  add_stats_command(app, ctx);
  add_stack_command(app, ctx);
  add_serve_command(app, ctx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const neuroflow::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitHalted;
  }
  return ctx.exit_code;
}
