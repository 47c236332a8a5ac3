// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/gateway/service.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/common/types.hpp"
#include "neuroflow/executor/workflow.hpp"
#include "neuroflow/gateway/api.hpp"
#include "neuroflow/gateway/artifacts.hpp"
#include "neuroflow/registry/registry.hpp"

#include <algorithm>
#include <chrono>
#include <regex>
#include <thread>

namespace neuroflow::gateway {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct WorkflowService::Run {
  std::string workflow_id;
  std::unique_ptr<executor::WorkflowRunner> runner;
  bool resume = false;
  std::string prompt;
  std::thread thread;
  std::atomic<bool> finished{false};
  std::exception_ptr error;
};

namespace {

constexpr auto kStartupWait = std::chrono::seconds(60);

/// Polls `ready` until it holds, the run finishes, or the wait expires.
template <typename Ready>
void await(const std::atomic<bool>& finished, Ready ready) {
  const auto deadline = Clock::now() + kStartupWait;
  while (!finished.load() && !ready() && Clock::now() < deadline)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string())
    throw ApiException(400, "bad_request", std::string("field '") + key + "' must be a string");
  const auto v = trim(body[key].get<std::string>());
  if (v.empty()) throw ApiException(400, "bad_request", std::string("field '") + key + "' must be non-empty");
  return v;
}

registry::Decision decision_of(const json& body) {
  const auto d = to_lower(required_string(body, "decision"));
  if (d == "approve") return registry::Decision::APPROVED;
  if (d == "reject") return registry::Decision::REJECTED;
  if (d == "retry") return registry::Decision::RETRY;
  throw ApiException(400, "bad_request", "decision must be approve, reject or retry");
}

std::vector<fs::path> workflow_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return out;
  for (const auto& e : fs::directory_iterator(root, ec))
    if (e.is_directory() && fs::exists(e.path() / registry::kRegistryFile)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

WorkflowService::WorkflowService(GatewayOptions options) : options_(std::move(options)) {
  if (options_.workspace_root.empty()) throw ConfigError("gateway needs a workspace root");
  if (!(options_.max_poll_seconds >= 0.0) || !(options_.poll_interval_seconds > 0.0))
    throw ConfigError("poll timings must be positive");
  fs::create_directories(options_.workspace_root);
}

WorkflowService::~WorkflowService() { shutdown(); }

fs::path WorkflowService::workflow_dir(const std::string& workflow_id) const {
  static const std::regex valid("[A-Za-z0-9][A-Za-z0-9._-]{0,127}");
  const fs::path dir = options_.workspace_root / workflow_id;
  if (!std::regex_match(workflow_id, valid) || !fs::exists(dir / registry::kRegistryFile))
    throw NotFoundError("no workflow '" + workflow_id + "'");
  return dir;
}

void WorkflowService::launch(const std::shared_ptr<Run>& run) {
  run->thread = std::thread([run] {
    try {
      if (run->resume)
        run->runner->resume(run->workflow_id);
      else
        run->runner->start(run->prompt);
    } catch (...) {
      run->error = std::current_exception();
    }
    run->finished.store(true);
  });
}

void WorkflowService::reap_locked() {
  for (auto it = runs_.begin(); it != runs_.end();) {
    if (!it->second->finished.load()) {
      ++it;
      continue;
    }
    if (it->second->thread.joinable()) it->second->thread.join();
    it = runs_.erase(it);
  }
}

json WorkflowService::submit(const json& body) {
  if (stopping_.load()) throw ApiException(503, "shutting_down", "the gateway is shutting down");
  if (!body.is_object()) throw ApiException(400, "bad_request", "request body must be a JSON object");
  const auto prompt = required_string(body, "prompt");
  const auto data_root = required_string(body, "data_root");
  if (!fs::is_directory(data_root)) throw ApiException(400, "bad_request", "data_root " + data_root + " is not a directory");

  json cfg = options_.defaults.is_object() ? options_.defaults : json::object();
  if (!cfg.contains("use_mocks")) cfg["use_mocks"] = false;
  if (body.contains("config")) {
    if (!body["config"].is_object()) throw ApiException(400, "bad_request", "config must be an object");
    cfg.merge_patch(body["config"]);
  }
  cfg["data_root"] = data_root;
  auto rc = executor::RunConfig::from_json(cfg);
  rc.workspace_root = options_.workspace_root;
  if (!options_.runner.empty()) rc.runner = options_.runner;
  if (rc.use_mocks && rc.runner.empty()) throw ApiException(400, "bad_request", "mock runs need the gateway's runner binary");
  rc.wait_for_approvals = cfg.value("wait_for_approvals", true);
  rc.workflow_id = executor::new_workflow_id();

  auto run = std::make_shared<Run>();
  run->workflow_id = rc.workflow_id;
  run->prompt = prompt;
  run->runner = std::make_unique<executor::WorkflowRunner>(rc);
  {
    std::lock_guard lock(mu_);
    reap_locked();
    runs_[run->workflow_id] = run;
    launch(run);
    await(run->finished, [&] { return run->runner->live_registry() != nullptr; });
  }
  if (run->finished.load() && run->error && !fs::exists(options_.workspace_root / run->workflow_id / registry::kRegistryFile))
    std::rethrow_exception(run->error);
  return {{"workflow_id", run->workflow_id}};
}

json WorkflowService::list() const {
  json out = json::array();
  for (const auto& dir : workflow_dirs(options_.workspace_root)) {
    const auto rec = registry::load_record(dir);
    const auto events = registry::read_events(dir);
    int completed = 0, pending = 0;
    for (const auto& [_, s] : rec.steps) completed += s.status == registry::StepStatus::COMPLETED;
    for (const auto& [_, a] : rec.approvals) pending += a.decision == registry::Decision::PENDING;
    out.push_back({{"workflow_id", rec.workflow_id},
                   {"prompt", rec.prompt},
                   {"phase", registry::to_string(rec.phase)},
                   {"halt_reason", rec.halt_reason ? json(*rec.halt_reason) : json(nullptr)},
                   {"created_at", rec.created_at},
                   {"updated_at", rec.updated_at},
                   {"steps_total", rec.steps.size()},
                   {"steps_completed", completed},
                   {"pending_approvals", pending},
                   {"last_event_seq", events.empty() ? 0 : events.back().seq},
                   {"last_event_at", events.empty() ? json(nullptr) : json(events.back().at)}});
  }
  return {{"workflows", out}};
}

json WorkflowService::record(const std::string& workflow_id) const {
  return registry::to_json(registry::load_record(workflow_dir(workflow_id)));
}

json WorkflowService::events(const std::string& workflow_id, std::uint64_t since, std::optional<double> timeout_seconds) const {
  const auto dir = workflow_dir(workflow_id);
  const double wait = std::clamp(timeout_seconds.value_or(options_.max_poll_seconds), 0.0, options_.max_poll_seconds);
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(wait));
  const auto interval = std::chrono::duration<double>(options_.poll_interval_seconds);
  std::vector<registry::Event> events;
  for (;;) {
    events = registry::read_events(dir, since);
    if (!events.empty() || Clock::now() >= deadline || stopping_.load()) break;
    // Nothing can follow DONE unless someone is still running the workflow.
    if (!active(workflow_id) && registry::load_record(dir).phase == registry::WorkflowPhase::DONE) break;
    std::this_thread::sleep_for(interval);
  }
  json list = json::array();
  for (const auto& e : events) list.push_back(registry::to_json(e));
  return {{"workflow_id", workflow_id},
          {"since", since},
          {"cursor", events.empty() ? since : events.back().seq},
          {"events", list}};
}

json WorkflowService::graph(const std::string& workflow_id) const {
  const auto dir = workflow_dir(workflow_id);
  if (!fs::exists(dir / "graph.json")) throw NotFoundError("workflow '" + workflow_id + "' has no plan");
  json g = json::parse(read_file(dir / "graph.json"));
  const auto rec = registry::load_record(dir);
  for (auto& node : g["nodes"]) {
    const auto it = rec.steps.find(node.at("step_id").get<std::string>());
    node["status"] = registry::to_string(it == rec.steps.end() ? registry::StepStatus::PENDING : it->second.status);
  }
  g["workflow_id"] = workflow_id;
  g["graph_digest"] = rec.graph_digest;
  return g;
}

json WorkflowService::approvals(const std::string& status) const {
  std::optional<registry::Decision> filter;
  if (!status.empty()) {
    try {
      filter = registry::parse_decision(to_upper(status));
    } catch (const Error&) {
      throw ApiException(400, "bad_request", "status must be pending, approved, rejected or retry");
    }
  }
  json out = json::array();
  for (const auto& dir : workflow_dirs(options_.workspace_root))
    for (const auto& [_, a] : registry::load_record(dir).approvals)
      if (!filter || a.decision == *filter) out.push_back(registry::to_json(a));
  return {{"approvals", out}};
}

json WorkflowService::decide(const std::string& approval_id, const json& body) {
  if (!body.is_object()) throw ApiException(400, "bad_request", "request body must be a JSON object");
  const auto decision = decision_of(body);
  std::string note;
  if (body.contains("note")) {
    if (!body["note"].is_string()) throw ApiException(400, "bad_request", "note must be a string");
    note = body["note"].get<std::string>();
  }
  std::optional<fs::path> owner;
  for (const auto& dir : workflow_dirs(options_.workspace_root))
    if (registry::load_record(dir).approvals.contains(approval_id)) owner = dir;
  if (!owner) throw NotFoundError("no approval '" + approval_id + "'");
  const auto workflow_id = owner->filename().string();

  // A running workflow has exactly one writer: route the decision through it.
  std::lock_guard lock(mu_);
  const auto it = runs_.find(workflow_id);
  registry::Registry* live = nullptr;
  if (it != runs_.end() && !it->second->finished.load()) {
    await(it->second->finished, [&] { return it->second->runner->live_registry() != nullptr; });
    if (!it->second->finished.load()) live = it->second->runner->live_registry();
  }
  std::unique_ptr<registry::Registry> opened;
  if (!live) {
    opened = registry::Registry::open(*owner);
    live = opened.get();
  }
  live->decide_approval(approval_id, decision, note);
  return registry::to_json(live->snapshot().approvals.at(approval_id));
}

json WorkflowService::resume(const std::string& workflow_id) {
  if (stopping_.load()) throw ApiException(503, "shutting_down", "the gateway is shutting down");
  const auto dir = workflow_dir(workflow_id);
  std::shared_ptr<Run> run;
  json skipped = json::array();
  bool resumed = false;
  {
    std::lock_guard lock(mu_);
    reap_locked();
    if (runs_.contains(workflow_id)) throw ConflictError("workflow '" + workflow_id + "' is already running");
    const auto rec = registry::load_record(dir);
    if (rec.graph_digest.empty()) throw ConflictError("workflow '" + workflow_id + "' was never planned");
    if (rec.phase == registry::WorkflowPhase::DONE) throw ConflictError("workflow '" + workflow_id + "' is already DONE");
    for (const auto& id : rec.completed()) skipped.push_back(id);
    const auto events = registry::read_events(dir);
    const std::uint64_t before = events.empty() ? 0 : events.back().seq;

    auto rc = executor::RunConfig::from_json(rec.config);
    rc.workspace_root = options_.workspace_root;
    if (!options_.runner.empty()) rc.runner = options_.runner;
    rc.wait_for_approvals = true;
    run = std::make_shared<Run>();
    run->workflow_id = workflow_id;
    run->resume = true;
    run->runner = std::make_unique<executor::WorkflowRunner>(rc);
    runs_[workflow_id] = run;
    launch(run);
    // Registry::resume appends a "resumed" note once the plan digest checks out.
    await(run->finished, [&] {
      const auto* live = run->runner->live_registry();
      return live && live->last_seq() > before;
    });
    const auto* live = run->runner->live_registry();
    resumed = live && live->last_seq() > before;
  }
  // Failures before the digest check leave nothing resumed.
  if (!resumed && run->error) std::rethrow_exception(run->error);
  if (!resumed) throw ApiException(500, "internal", "resume of '" + workflow_id + "' did not start");
  return {{"resumed", true}, {"skipped", skipped}};
}

fs::path WorkflowService::artifact(const std::string& workflow_id, const std::string& relpath) const {
  return resolve_artifact(workflow_dir(workflow_id), relpath);
}

bool WorkflowService::active(const std::string& workflow_id) const {
  std::lock_guard lock(mu_);
  const auto it = runs_.find(workflow_id);
  return it != runs_.end() && !it->second->finished.load();
}

void WorkflowService::wait_idle() {
  for (;;) {
    {
      std::lock_guard lock(mu_);
      reap_locked();
      if (runs_.empty()) return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void WorkflowService::shutdown() {
  stopping_.store(true);
  {
    std::lock_guard lock(mu_);
    for (auto& [_, run] : runs_) run->runner->request_stop();
  }
  wait_idle();
}

}  // namespace neuroflow::gateway
