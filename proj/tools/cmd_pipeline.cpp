// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "neuroflow/common/io.hpp"
#include "neuroflow/executor/workflow.hpp"
#include "neuroflow/registry/registry.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>

namespace neuroflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct EngineFlags {
  std::string workspace = "workflows";
  std::string config_file;
  std::string data_root;
  std::string catalog;
  std::string dependencies;
  std::string mock_manifest;
  bool mock = false;
  std::string backend;
  std::string endpoint;
  std::string model;
  std::string mode;
  int max_retries = -1;
  double timeout = 0;
  int parallelism = -1;
  bool approve_all = false;
  bool wait = false;
  bool json_out = false;
  int interrupt_after = 0;
  std::string interrupt_during;
};

void add_engine_options(CLI::App* sub, EngineFlags& f, bool for_run) {
  sub->add_option("--workspace", f.workspace, "Directory holding workflow directories")->capture_default_str();
  sub->add_flag("--approve-all", f.approve_all, "Approve every escalation automatically");
  sub->add_flag("--wait", f.wait, "Wait for approval decisions instead of stopping");
  sub->add_option("--parallelism", f.parallelism, "Worker count (default: number of modalities)")->check(CLI::NonNegativeNumber);
  sub->add_flag("--json", f.json_out, "Print the result as JSON");
  sub->add_option("--interrupt-after", f.interrupt_after)->group("")->check(CLI::PositiveNumber);
  sub->add_option("--interrupt-during", f.interrupt_during)->group("");
  if (!for_run) return;
  sub->add_option("--config", f.config_file, "Engine configuration document (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--data-root", f.data_root, "BIDS-like raw dataset");
  sub->add_option("--catalog", f.catalog, "Template catalog (default: bundled)")->check(CLI::ExistingFile);
  sub->add_option("--dependencies", f.dependencies, "Modality dependency table")->check(CLI::ExistingFile);
  sub->add_option("--mock-manifest", f.mock_manifest, "Mock tool behaviours")->check(CLI::ExistingFile);
  sub->add_flag("--mock", f.mock, "Run the mock tool suite instead of real binaries");
  sub->add_option("--backend", f.backend, "Intent backend: rule or http")->check(CLI::IsMember({"rule", "http"}));
  sub->add_option("--endpoint", f.endpoint, "Chat-completion URL for the http backend");
  sub->add_option("--model", f.model, "Model name for the http backend");
  sub->add_option("--mode", f.mode, "Script generation: template or model")->check(CLI::IsMember({"template", "model"}));
  sub->add_option("--max-retries", f.max_retries, "Retries per step before escalation")->check(CLI::NonNegativeNumber);
  sub->add_option("--timeout", f.timeout, "Per-step timeout override in seconds")->check(CLI::PositiveNumber);
}

executor::RunConfig make_config(const EngineFlags& f, const Context& ctx) {
  executor::RunConfig c;
  if (!f.config_file.empty()) {
    json doc = json::parse(read_file(f.config_file), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError(f.config_file + " is not a JSON object");
    if (!doc.contains("use_mocks")) doc["use_mocks"] = false;
    c = executor::RunConfig::from_json(doc);
  } else {
    c.use_mocks = false;
  }
  c.workspace_root = f.workspace;
  if (!f.data_root.empty()) c.data_root = f.data_root;
  if (!f.catalog.empty()) c.catalog_path = f.catalog;
  if (!f.dependencies.empty()) c.dependencies_path = f.dependencies;
  if (!f.mock_manifest.empty()) c.mock_manifest_path = f.mock_manifest;
  if (f.mock) c.use_mocks = true;
  if (f.backend == "rule") c.backend.kind = planner::BackendKind::RULE_BASED;
  if (f.backend == "http") c.backend.kind = planner::BackendKind::HTTP_CHAT;
  if (!f.endpoint.empty()) c.backend.endpoint_url = f.endpoint;
  if (!f.model.empty()) c.backend.model_name = f.model;
  c.backend.check();
  if (f.mode == "model") c.mode = executor::GenerationMode::MODEL;
  if (f.mode == "template") c.mode = executor::GenerationMode::TEMPLATE;
  if (f.max_retries >= 0) c.max_exec_retries = f.max_retries;
  if (f.timeout > 0) c.step_timeout = f.timeout;
  if (f.parallelism >= 0) c.parallelism = f.parallelism;
  c.approve_all = f.approve_all;
  c.wait_for_approvals = f.wait;
  c.runner = ctx.self;
  if (c.data_root.empty()) throw UsageError("--data-root is required");
  if (!fs::is_directory(c.data_root)) throw UsageError("data root " + c.data_root.string() + " is not a directory");
  return c;
}

executor::InterruptPlan interrupt_plan(const EngineFlags& f) {
  executor::InterruptPlan p;
  if (f.interrupt_after > 0) p.after_completions = f.interrupt_after;
  if (!f.interrupt_during.empty()) p.while_running = f.interrupt_during;
  return p;
}

int report(const executor::RunResult& r, const registry::WorkflowRecord& rec, bool as_json) {
  int completed = 0;
  for (const auto& [_, s] : rec.steps) completed += s.status == registry::StepStatus::COMPLETED;
  if (as_json) {
    std::cout << json{{"workflow_id", r.workflow_id},
                      {"workflow_dir", r.workflow_dir.string()},
                      {"phase", registry::to_string(r.phase)},
                      {"interrupted", r.interrupted},
                      {"blocked_on_approval", r.blocked_on_approval},
                      {"steps_completed", completed},
                      {"steps_total", rec.steps.size()},
                      {"message", r.message}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "workflow " << r.workflow_id << ": " << registry::to_string(r.phase) << " (" << completed << "/"
              << rec.steps.size() << " steps completed)\n";
    if (rec.halt_reason) std::cout << "halt reason: " << *rec.halt_reason << "\n";
    if (r.interrupted) std::cout << "interrupted; continue with: neuroflow resume " << r.workflow_id << "\n";
    if (r.blocked_on_approval) std::cout << r.message << "; decide them, then resume\n";
    else if (!r.message.empty()) std::cout << r.message << "\n";
  }
  return r.done() ? kExitOk : kExitHalted;
}

void print_status(const registry::WorkflowRecord& rec) {
  std::cout << "workflow " << rec.workflow_id << "  phase " << registry::to_string(rec.phase) << "\n";
  std::cout << "prompt: " << rec.prompt << "\n";
  if (rec.halt_reason) std::cout << "halt reason: " << *rec.halt_reason << "\n";
  std::printf("%-30s %-18s %8s %10s\n", "STEP", "STATUS", "ATTEMPTS", "WALL_S");
  for (const auto& [id, s] : rec.steps) {
    std::printf("%-30s %-18s %8d %10.2f%s\n", id.c_str(), std::string(registry::to_string(s.status)).c_str(), s.attempts,
                s.wall_seconds, s.human_override ? "  (human override)" : "");
  }
  for (const auto& [_, a] : rec.approvals)
    if (a.decision == registry::Decision::PENDING)
      std::cout << "pending approval " << a.approval_id << " for " << a.step_id << ":\n  " << a.reason << "\n";
}

}  // namespace

void add_pipeline_commands(CLI::App& app, Context& ctx) {
  {
    auto flags = std::make_shared<EngineFlags>();
    auto prompt = std::make_shared<std::string>();
    auto id = std::make_shared<std::string>();
    auto* sub = app.add_subcommand("run", "Plan and execute a workflow from a research goal");
    sub->add_option("--prompt", *prompt, "Natural-language research goal")->required();
    sub->add_option("--id", *id, "Explicit workflow id");
    add_engine_options(sub, *flags, true);
    sub->callback([&ctx, flags, prompt, id] {
      auto config = make_config(*flags, ctx);
      config.workflow_id = *id;
      executor::WorkflowRunner runner(config);
      const auto r = runner.start(*prompt, interrupt_plan(*flags));
      ctx.exit_code = report(r, runner.registry()->snapshot(), flags->json_out);
    });
  }
  {
    auto flags = std::make_shared<EngineFlags>();
    auto id = std::make_shared<std::string>();
    auto* sub = app.add_subcommand("resume", "Continue an interrupted or approved workflow");
    sub->add_option("workflow_id", *id)->required();
    add_engine_options(sub, *flags, false);
    sub->callback([&ctx, flags, id] {
      const fs::path dir = fs::path(flags->workspace) / *id;
      if (!fs::exists(dir / registry::kRegistryFile)) throw UsageError("no workflow " + *id + " under " + flags->workspace);
      auto config = executor::RunConfig::from_json(registry::load_record(dir).config);
      config.workspace_root = flags->workspace;
      config.runner = ctx.self;
      config.approve_all = flags->approve_all;
      config.wait_for_approvals = flags->wait;
      if (flags->parallelism >= 0) config.parallelism = flags->parallelism;
      executor::WorkflowRunner runner(config);
      const auto r = runner.resume(*id, interrupt_plan(*flags));
      ctx.exit_code = report(r, runner.registry()->snapshot(), flags->json_out);
    });
  }
  {
    auto workspace = std::make_shared<std::string>("workflows");
    auto id = std::make_shared<std::string>();
    auto as_json = std::make_shared<bool>(false);
    auto* sub = app.add_subcommand("status", "Show a workflow's phase, steps and pending approvals");
    sub->add_option("workflow_id", *id)->required();
    sub->add_option("--workspace", *workspace)->capture_default_str();
    sub->add_flag("--json", *as_json, "Print the registry document");
    sub->callback([&ctx, workspace, id, as_json] {
      const fs::path dir = fs::path(*workspace) / *id;
      if (!fs::exists(dir / registry::kRegistryFile)) throw UsageError("no workflow " + *id + " under " + *workspace);
      const auto rec = registry::load_record(dir);
      if (*as_json) std::cout << registry::to_json(rec).dump(2) << "\n";
      else print_status(rec);
      ctx.exit_code = rec.phase == registry::WorkflowPhase::HALTED ? kExitHalted : kExitOk;
    });
  }
  {
    auto workspace = std::make_shared<std::string>("workflows");
    auto approval = std::make_shared<std::string>();
    auto decision = std::make_shared<std::string>();
    auto note = std::make_shared<std::string>();
    auto* sub = app.add_subcommand("decide", "Approve, reject or retry an escalated step");
    sub->add_option("approval_id", *approval)->required();
    sub->add_option("decision", *decision)->required()->check(CLI::IsMember({"approve", "reject", "retry"}));
    sub->add_option("--note", *note);
    sub->add_option("--workspace", *workspace)->capture_default_str();
    sub->callback([workspace, approval, decision, note] {
      const auto dot = approval->rfind(".a");
      if (dot == std::string::npos) throw UsageError("malformed approval id " + *approval);
      const fs::path dir = fs::path(*workspace) / approval->substr(0, dot);
      if (!fs::exists(dir / registry::kRegistryFile)) throw UsageError("no workflow for approval " + *approval);
      auto reg = registry::Registry::open(dir);
      const auto d = *decision == "approve" ? registry::Decision::APPROVED
                     : *decision == "reject" ? registry::Decision::REJECTED
                                             : registry::Decision::RETRY;
      reg->decide_approval(*approval, d, *note);
      std::cout << *approval << ": " << registry::to_string(d) << "\n";
    });
  }
}

}  // namespace neuroflow::cli
