// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/executor/workflow.hpp"

#include "neuroflow/common/io.hpp"
#include "neuroflow/common/random.hpp"
#include "neuroflow/toolkit/mock.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace neuroflow::executor {

using nlohmann::json;
using registry::Decision;
using registry::StepStatus;
using registry::WorkflowPhase;

json RunConfig::to_json() const {
  json j{{"workspace_root", workspace_root.string()},
         {"data_root", data_root.string()},
         {"catalog_path", catalog_path.string()},
         {"dependencies_path", dependencies_path.string()},
         {"mock_manifest_path", mock_manifest_path.string()},
         {"use_mocks", use_mocks},
         {"backend", planner::to_json(backend)},
         {"mode", mode == GenerationMode::TEMPLATE ? "TEMPLATE" : "MODEL"},
         {"max_exec_retries", max_exec_retries},
         {"parallelism", parallelism},
         {"env_allowlist", env_allowlist},
         {"approve_all", approve_all}};
  if (step_timeout) j["step_timeout"] = *step_timeout;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.workspace_root = j.value("workspace_root", std::string{});
  c.data_root = j.value("data_root", std::string{});
  c.catalog_path = j.value("catalog_path", std::string{});
  c.dependencies_path = j.value("dependencies_path", std::string{});
  c.mock_manifest_path = j.value("mock_manifest_path", std::string{});
  c.use_mocks = j.value("use_mocks", true);
  if (j.contains("backend")) c.backend = planner::backend_from_json(j.at("backend"));
  const auto mode = to_upper(j.value("mode", std::string("TEMPLATE")));
  if (mode != "TEMPLATE" && mode != "MODEL") throw ConfigError("generation mode must be TEMPLATE or MODEL");
  c.mode = mode == "MODEL" ? GenerationMode::MODEL : GenerationMode::TEMPLATE;
  c.max_exec_retries = j.value("max_exec_retries", kDefaultMaxExecRetries);
  if (c.max_exec_retries < 0) throw ConfigError("max_exec_retries must be >= 0");
  c.parallelism = j.value("parallelism", 0);
  c.env_allowlist = j.value("env_allowlist", c.env_allowlist);
  c.approve_all = j.value("approve_all", false);
  if (j.contains("step_timeout") && j["step_timeout"].is_number()) c.step_timeout = j["step_timeout"].get<double>();
  return c;
}

std::string new_workflow_id() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::random_device rd;
  Rng rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
          static_cast<std::uint64_t>(now.time_since_epoch().count()));
  std::ostringstream s;
  s << "wf-" << std::put_time(&tm, "%Y%m%d%H%M%S") << '-' << std::hex << std::setw(6) << std::setfill('0')
    << (rng.next_u64() & 0xffffff);
  return s.str();
}

struct WorkflowRunner::Plan {
  toolkit::TemplateCatalog catalog;
  graph::DependencyTable deps;
  toolkit::DatasetContext dataset;
  graph::StepGraph graph;
  std::string digest;
};

namespace {

toolkit::TemplateCatalog load_catalog(const RunConfig& c) {
  return c.catalog_path.empty() ? toolkit::TemplateCatalog::load_default() : toolkit::TemplateCatalog::load(c.catalog_path);
}

graph::DependencyTable load_deps(const RunConfig& c) {
  return c.dependencies_path.empty() ? graph::load_dependency_table(default_data_dir() / "dependencies.json")
                                     : graph::load_dependency_table(c.dependencies_path);
}

}  // namespace

graph::StepGraph rebuild_graph(const registry::WorkflowRecord& record) {
  const RunConfig c = RunConfig::from_json(record.config);
  return graph::build_graph(record.intent, load_deps(c), load_catalog(c), toolkit::scan_dataset(c.data_root));
}

WorkflowRunner::WorkflowRunner(RunConfig config, std::shared_ptr<planner::ChatBackend> chat)
    : config_(std::move(config)), chat_(std::move(chat)) {
  if (config_.workspace_root.empty()) throw ConfigError("workspace_root is required");
  if (config_.max_exec_retries < 0) throw ConfigError("max_exec_retries must be >= 0");
  if (config_.parallelism < 0) throw ConfigError("parallelism must be >= 0");
  config_.workspace_root = fs::absolute(config_.workspace_root);
  if (!config_.data_root.empty()) config_.data_root = fs::absolute(config_.data_root);
  for (auto* p : {&config_.catalog_path, &config_.dependencies_path, &config_.mock_manifest_path})
    if (!p->empty()) *p = fs::absolute(*p);
}

WorkflowRunner::~WorkflowRunner() = default;

std::unique_ptr<WorkflowRunner::Plan> WorkflowRunner::make_plan(const planner::WorkflowIntent& intent) {
  auto plan = std::make_unique<Plan>();
  plan->catalog = load_catalog(config_);
  plan->deps = load_deps(config_);
  plan->dataset = toolkit::scan_dataset(config_.data_root);
  plan->graph = graph::build_graph(intent, plan->deps, plan->catalog, plan->dataset);
  plan->digest = graph::graph_digest(plan->graph, plan->catalog);
  return plan;
}

RunResult WorkflowRunner::start(const std::string& prompt, const InterruptPlan& interrupt) {
  if (trim(prompt).empty()) throw ConfigError("prompt must be non-empty");
  const std::string id = config_.workflow_id.empty() ? new_workflow_id() : config_.workflow_id;
  registry::WorkflowRecord record;
  record.workflow_id = id;
  record.prompt = prompt;
  record.config = config_.to_json();
  registry_ = registry::Registry::create(config_.workspace_root / id, std::move(record));
  live_.store(registry_.get());

  auto sink = [this](const planner::ParseAttempt& a) {
    registry_->append_event(registry::EventKind::NOTE, {{"message", "intent_attempt"},
                                                         {"index", a.index},
                                                         {"raw_response", a.raw_response},
                                                         {"error", a.error}});
  };
  planner::ParseOutcome parse;
  if (config_.backend.kind == planner::BackendKind::HTTP_CHAT && chat_)
    parse = planner::parse_intent(prompt, *chat_, config_.backend.max_parse_retries, sink);
  else
    parse = planner::parse_intent(prompt, config_.backend, sink);

  RunResult r = start_with_intent(prompt, parse, interrupt);
  return r;
}

RunResult WorkflowRunner::start_with_intent(const std::string& prompt, const planner::ParseOutcome& parse,
                                            const InterruptPlan& interrupt) {
  if (!registry_) {
    const std::string id = config_.workflow_id.empty() ? new_workflow_id() : config_.workflow_id;
    registry::WorkflowRecord record;
    record.workflow_id = id;
    record.prompt = prompt;
    record.config = config_.to_json();
    registry_ = registry::Registry::create(config_.workspace_root / id, std::move(record));
    live_.store(registry_.get());
  }
  RunResult result;
  result.workflow_id = registry_->workflow_id();
  result.workflow_dir = registry_->dir();
  result.parse = parse;
  if (!parse.valid()) {
    registry_->halt("intent_invalid: " + parse.failure_reason.value_or("unknown"));
    result.phase = WorkflowPhase::HALTED;
    result.message = "intent could not be parsed (" + parse.failure_reason.value_or("unknown") + ")";
    return result;
  }
  std::unique_ptr<Plan> plan;
  try {
    plan = make_plan(*parse.intent);
  } catch (const Error& e) {
    registry_->halt(std::string("planning failed: ") + e.what());
    result.phase = WorkflowPhase::HALTED;
    result.message = e.what();
    return result;
  }
  std::vector<std::pair<std::string, std::string>> steps;
  for (const auto& n : plan->graph.nodes()) steps.emplace_back(n.step_id, n.step_id);
  registry_->set_plan(*parse.intent, plan->digest, steps);
  write_file_atomic(registry_->dir() / "graph.json", graph::export_graph(plan->graph, plan->catalog).dump(2) + "\n");
  return execute(*plan, interrupt);
}

RunResult WorkflowRunner::resume(const std::string& workflow_id, const InterruptPlan& interrupt) {
  registry_ = registry::Registry::open(config_.workspace_root / workflow_id);
  live_.store(registry_.get());
  const auto record = registry_->snapshot();
  const RunConfig recorded = RunConfig::from_json(record.config);
  config_.data_root = recorded.data_root;
  config_.catalog_path = recorded.catalog_path;
  config_.dependencies_path = recorded.dependencies_path;
  config_.mock_manifest_path = recorded.mock_manifest_path;
  config_.use_mocks = recorded.use_mocks;
  if (record.graph_digest.empty())
    throw ConflictError("workflow " + workflow_id + " never got past planning; nothing to resume");
  auto plan = make_plan(record.intent);
  registry_->resume(plan->digest);
  return execute(*plan, interrupt);
}

RunResult WorkflowRunner::execute(Plan& plan, const InterruptPlan& interrupt) {
  auto& reg = *registry_;
  const fs::path wf_dir = reg.dir();
  RunResult result;
  result.workflow_id = reg.workflow_id();
  result.workflow_dir = wf_dir;

  GenerationEnv env;
  env.catalog = &plan.catalog;
  env.dataset = &plan.dataset;
  env.data_root = config_.data_root;
  env.runner = config_.runner;
  if (config_.use_mocks) {
    if (config_.runner.empty()) throw ConfigError("mock mode needs the runner binary path");
    const auto manifest = config_.mock_manifest_path.empty() ? toolkit::MockManifest::load_default()
                                                             : toolkit::MockManifest::load(config_.mock_manifest_path);
    env.tool_paths = toolkit::install_mock_suite(manifest, wf_dir / ".tools", config_.runner);
  }
  env.upstream_out = [&reg, wf_dir](const std::string& id) -> std::optional<fs::path> {
    try {
      const auto s = reg.step(id);
      if (s.status != StepStatus::COMPLETED) return std::nullopt;
      const auto it = s.outputs.find("out");
      if (it == s.outputs.end()) return std::nullopt;
      return wf_dir / it->second;
    } catch (const NotFoundError&) {
      return std::nullopt;
    }
  };
  env.workspace_of = [wf_dir](const std::string& id) { return wf_dir / id; };

  std::unique_ptr<ScriptGenerator> generator;
  if (config_.mode == GenerationMode::MODEL) {
    auto backend = chat_ ? chat_ : std::make_shared<planner::HttpChatBackend>(config_.backend);
    generator = std::make_unique<ModelGenerator>(env, backend);
  } else {
    generator = std::make_unique<TemplateGenerator>(env);
  }

  const std::size_t parallelism =
      config_.parallelism > 0 ? static_cast<std::size_t>(config_.parallelism)
                              : std::max<std::size_t>(1, plan.graph.modalities().size());

  if (reg.snapshot().phase == WorkflowPhase::DISTRIBUTION) reg.set_phase(WorkflowPhase::PREPROCESSING);

  struct Finished {
    std::string step_id;
    StepOutcome outcome = StepOutcome::COMPLETED;
    std::string error;
  };
  std::mutex qmu;
  std::condition_variable qcv;
  std::deque<Finished> finished;
  std::map<std::string, std::thread> running;
  std::atomic<bool> cancel{false};
  bool stopping = false;
  int completions = 0;
  std::string internal_error;

  auto stop_now = [&](bool as_interrupt) {
    cancel.store(true);
    stopping = true;
    if (as_interrupt) result.interrupted = true;
  };

  auto dispatch = [&](const graph::StepNode& node) {
    if (node.phase == graph::StepPhase::INTEGRATE) reg.set_phase(WorkflowPhase::INTEGRATION);
    if (node.phase == graph::StepPhase::TASK) reg.set_phase(WorkflowPhase::TASK);
    ExecutionRequest req;
    req.step = node;
    req.workspace = wf_dir / node.step_id;
    req.workflow_dir = wf_dir;
    req.env_allowlist = config_.env_allowlist;
    for (const auto& dep : node.depends_on)
      if (const auto out = env.upstream_out(dep)) req.resolved_inputs[dep] = *out;
    const auto& tool = plan.catalog.tool(node.tool_id);
    req.timeout_seconds = config_.step_timeout.value_or(node.timeout_seconds.value_or(tool.default_timeout));
    const auto& schema = plan.catalog.schema(node.output_schema_id);
    running.emplace(node.step_id, std::thread([&, req, &schema = schema] {
      Finished f{req.step.step_id, StepOutcome::COMPLETED, {}};
      try {
        f.outcome = run_step(reg, req, *generator, schema, config_.max_exec_retries, &cancel).outcome;
      } catch (const std::exception& e) {
        f.outcome = StepOutcome::INTERRUPTED;
        f.error = e.what();
      }
      std::lock_guard lock(qmu);
      finished.push_back(std::move(f));
      qcv.notify_all();
    }));
  };

  auto forward_integration_notes = [&](const std::string& step_id) {
    const fs::path notes = wf_dir / step_id / "out" / "integration_notes.jsonl";
    if (!fs::exists(notes)) return;
    std::istringstream in(read_file(notes));
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      json payload = json::parse(line, nullptr, false);
      if (payload.is_discarded()) continue;
      const std::string message = payload.value("message", std::string("integration note"));
      payload["step_id"] = step_id;
      reg.note(message, payload);
    }
  };

  for (;;) {
    if (stop_.load() && !stopping) stop_now(true);
    auto snap = reg.snapshot();
    if (snap.phase == WorkflowPhase::HALTED && !stopping) stop_now(false);
    const auto completed = snap.completed();

    if (!stopping) {
      for (const auto& id : graph::topo_schedule(plan.graph, completed)) {
        if (running.size() >= parallelism) break;
        if (running.contains(id) || snap.steps.at(id).status != StepStatus::PENDING) continue;
        dispatch(plan.graph.node(id));
        if (interrupt.while_running && *interrupt.while_running == id) stop_now(true);
      }
    }

    if (running.empty()) {
      if (stopping) break;
      if (completed.size() == plan.graph.size()) {
        reg.set_phase(WorkflowPhase::DONE);
        break;
      }
      const auto pending = reg.pending_approvals();
      if (!pending.empty()) {
        if (config_.approve_all) {
          for (const auto& a : pending) reg.decide_approval(a.approval_id, Decision::APPROVED, "auto-approved (approve_all)");
          continue;
        }
        if (config_.wait_for_approvals) {
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
          continue;
        }
        result.blocked_on_approval = true;
        result.message = std::to_string(pending.size()) + " step(s) await approval";
        break;
      }
      std::string stuck;
      for (const auto& [id, s] : snap.steps)
        if (s.status == StepStatus::FAILED) stuck += (stuck.empty() ? "" : ", ") + id;
      reg.halt(stuck.empty() ? "no runnable steps" : "failed steps: " + stuck);
      break;
    }

    std::deque<Finished> batch;
    {
      std::unique_lock lock(qmu);
      qcv.wait_for(lock, std::chrono::milliseconds(100), [&] { return !finished.empty(); });
      batch.swap(finished);
    }
    for (auto& f : batch) {
      running.at(f.step_id).join();
      running.erase(f.step_id);
      if (!f.error.empty()) {
        if (internal_error.empty()) internal_error = f.step_id + ": " + f.error;
        stop_now(false);
        continue;
      }
      if (f.outcome == StepOutcome::COMPLETED) {
        ++completions;
        if (plan.graph.node(f.step_id).phase == graph::StepPhase::INTEGRATE) forward_integration_notes(f.step_id);
        if (interrupt.after_completions && completions >= *interrupt.after_completions) stop_now(true);
      } else if (f.outcome == StepOutcome::ESCALATED && config_.approve_all) {
        for (const auto& a : reg.pending_approvals())
          if (a.step_id == f.step_id) reg.decide_approval(a.approval_id, Decision::APPROVED, "auto-approved (approve_all)");
      }
    }
  }

  for (auto& [_, t] : running) t.join();
  if (!internal_error.empty()) {
    try {
      reg.halt("internal error in " + internal_error);
    } catch (const Error&) {
    }
    result.message = internal_error;
  }
  result.phase = reg.snapshot().phase;
  return result;
}

}  // namespace neuroflow::executor
