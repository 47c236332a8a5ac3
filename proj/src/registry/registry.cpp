// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/registry/registry.hpp"

#include "neuroflow/common/io.hpp"

#include <array>
#include <iostream>
#include <sstream>
#include <utility>

namespace neuroflow::registry {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<StepStatus, const char*>, 6> kStatusNames{{
    {StepStatus::PENDING, "PENDING"},
    {StepStatus::RUNNING, "RUNNING"},
    {StepStatus::COMPLETED, "COMPLETED"},
    {StepStatus::FAILED, "FAILED"},
    {StepStatus::AWAITING_APPROVAL, "AWAITING_APPROVAL"},
    {StepStatus::SKIPPED, "SKIPPED"},
}};
constexpr std::array<std::pair<WorkflowPhase, const char*>, 6> kPhaseNames{{
    {WorkflowPhase::DISTRIBUTION, "DISTRIBUTION"},
    {WorkflowPhase::PREPROCESSING, "PREPROCESSING"},
    {WorkflowPhase::INTEGRATION, "INTEGRATION"},
    {WorkflowPhase::TASK, "TASK"},
    {WorkflowPhase::DONE, "DONE"},
    {WorkflowPhase::HALTED, "HALTED"},
}};
constexpr std::array<std::pair<EventKind, const char*>, 9> kEventNames{{
    {EventKind::PHASE_CHANGE, "PHASE_CHANGE"},
    {EventKind::STEP_START, "STEP_START"},
    {EventKind::STEP_RETRY, "STEP_RETRY"},
    {EventKind::STEP_DONE, "STEP_DONE"},
    {EventKind::STEP_FAIL, "STEP_FAIL"},
    {EventKind::VALIDATION_FAIL, "VALIDATION_FAIL"},
    {EventKind::APPROVAL_REQUESTED, "APPROVAL_REQUESTED"},
    {EventKind::APPROVAL_DECIDED, "APPROVAL_DECIDED"},
    {EventKind::NOTE, "NOTE"},
}};
constexpr std::array<std::pair<Decision, const char*>, 4> kDecisionNames{{
    {Decision::PENDING, "PENDING"},
    {Decision::APPROVED, "APPROVED"},
    {Decision::REJECTED, "REJECTED"},
    {Decision::RETRY, "RETRY"},
}};

template <typename E, std::size_t N>
std::string name_of(const std::array<std::pair<E, const char*>, N>& table, E v) {
  for (const auto& [e, n] : table)
    if (e == v) return n;
  return "?";
}

template <typename E, std::size_t N>
E value_of(const std::array<std::pair<E, const char*>, N>& table, const std::string& s, const char* what) {
  const auto up = to_upper(s);
  for (const auto& [e, n] : table)
    if (up == n) return e;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

std::string to_string(StepStatus s) { return name_of(kStatusNames, s); }
std::string to_string(WorkflowPhase p) { return name_of(kPhaseNames, p); }
std::string to_string(EventKind k) { return name_of(kEventNames, k); }
std::string to_string(Decision d) { return name_of(kDecisionNames, d); }
StepStatus parse_step_status(const std::string& s) { return value_of(kStatusNames, s, "step status"); }
WorkflowPhase parse_phase(const std::string& s) { return value_of(kPhaseNames, s, "phase"); }
EventKind parse_event_kind(const std::string& s) { return value_of(kEventNames, s, "event kind"); }
Decision parse_decision(const std::string& s) { return value_of(kDecisionNames, s, "decision"); }

std::set<std::string> WorkflowRecord::completed() const {
  std::set<std::string> out;
  for (const auto& [id, s] : steps)
    if (s.status == StepStatus::COMPLETED) out.insert(id);
  return out;
}

long WorkflowRecord::total_prompt_tokens() const {
  long n = 0;
  for (const auto& [_, s] : steps) n += s.prompt_tokens;
  return n;
}

long WorkflowRecord::total_completion_tokens() const {
  long n = 0;
  for (const auto& [_, s] : steps) n += s.completion_tokens;
  return n;
}

json to_json(const StepRecord& s) {
  json j{{"step_id", s.step_id},
         {"status", to_string(s.status)},
         {"attempts", s.attempts},
         {"started_at", s.started_at},
         {"finished_at", s.finished_at},
         {"wall_seconds", s.wall_seconds},
         {"prompt_tokens", s.prompt_tokens},
         {"completion_tokens", s.completion_tokens},
         {"workspace_path", s.workspace_path},
         {"last_error", s.last_error ? json(*s.last_error) : json(nullptr)},
         {"outputs", s.outputs},
         {"human_override", s.human_override}};
  if (!s.provenance_note.empty()) j["provenance_note"] = s.provenance_note;
  return j;
}

StepRecord step_from_json(const json& j) {
  StepRecord s;
  s.step_id = j.at("step_id").get<std::string>();
  s.status = parse_step_status(j.at("status").get<std::string>());
  s.attempts = j.value("attempts", 0);
  s.started_at = j.value("started_at", std::string{});
  s.finished_at = j.value("finished_at", std::string{});
  s.wall_seconds = j.value("wall_seconds", 0.0);
  s.prompt_tokens = j.value("prompt_tokens", 0L);
  s.completion_tokens = j.value("completion_tokens", 0L);
  s.workspace_path = j.value("workspace_path", std::string{});
  if (j.contains("last_error") && j["last_error"].is_string()) s.last_error = j["last_error"].get<std::string>();
  s.outputs = j.value("outputs", std::map<std::string, std::string>{});
  s.human_override = j.value("human_override", false);
  s.provenance_note = j.value("provenance_note", std::string{});
  return s;
}

json to_json(const ApprovalRequest& a) {
  return {{"approval_id", a.approval_id}, {"workflow_id", a.workflow_id}, {"step_id", a.step_id},
          {"reason", a.reason},           {"requested_at", a.requested_at}, {"decision", to_string(a.decision)},
          {"decided_at", a.decided_at},   {"note", a.note}};
}

ApprovalRequest approval_from_json(const json& j) {
  ApprovalRequest a;
  a.approval_id = j.at("approval_id").get<std::string>();
  a.workflow_id = j.value("workflow_id", std::string{});
  a.step_id = j.at("step_id").get<std::string>();
  a.reason = j.value("reason", std::string{});
  a.requested_at = j.value("requested_at", std::string{});
  a.decision = parse_decision(j.value("decision", std::string("PENDING")));
  a.decided_at = j.value("decided_at", std::string{});
  a.note = j.value("note", std::string{});
  return a;
}

json to_json(const WorkflowRecord& r) {
  json steps = json::object();
  for (const auto& [id, s] : r.steps) steps[id] = to_json(s);
  json approvals = json::object();
  for (const auto& [id, a] : r.approvals) approvals[id] = to_json(a);
  return {{"schema_version", kSchemaVersion},
          {"workflow_id", r.workflow_id},
          {"prompt", r.prompt},
          {"intent", planner::to_json(r.intent)},
          {"graph_digest", r.graph_digest},
          {"phase", to_string(r.phase)},
          {"steps", steps},
          {"approvals", approvals},
          {"created_at", r.created_at},
          {"updated_at", r.updated_at},
          {"halt_reason", r.halt_reason ? json(*r.halt_reason) : json(nullptr)},
          {"usage", {{"prompt_tokens", r.total_prompt_tokens()}, {"completion_tokens", r.total_completion_tokens()}}},
          {"config", r.config}};
}

WorkflowRecord record_from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion)
    throw ConfigError("unsupported registry schema_version " + j.value("schema_version", json(0)).dump());
  WorkflowRecord r;
  r.workflow_id = j.at("workflow_id").get<std::string>();
  r.prompt = j.value("prompt", std::string{});
  r.intent = planner::intent_from_json(j.at("intent"));
  r.graph_digest = j.value("graph_digest", std::string{});
  r.phase = parse_phase(j.at("phase").get<std::string>());
  const json steps = j.value("steps", json::object());
  for (const auto& [id, s] : steps.items()) r.steps[id] = step_from_json(s);
  const json approvals = j.value("approvals", json::object());
  for (const auto& [id, a] : approvals.items()) r.approvals[id] = approval_from_json(a);
  r.created_at = j.value("created_at", std::string{});
  r.updated_at = j.value("updated_at", std::string{});
  if (j.contains("halt_reason") && j["halt_reason"].is_string()) r.halt_reason = j["halt_reason"].get<std::string>();
  r.config = j.value("config", json::object());
  return r;
}

json to_json(const Event& e) {
  return {{"seq", e.seq}, {"workflow_id", e.workflow_id}, {"kind", to_string(e.kind)},
          {"payload", e.payload}, {"at", e.at}};
}

Event event_from_json(const json& j) {
  Event e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.workflow_id = j.value("workflow_id", std::string{});
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.payload = j.value("payload", json::object());
  e.at = j.value("at", std::string{});
  return e;
}

void persist(const fs::path& workflow_dir, const WorkflowRecord& record) {
  write_file_atomic(workflow_dir / kRegistryFile, to_json(record).dump(2) + "\n");
}

WorkflowRecord load_record(const fs::path& workflow_dir) {
  const auto path = workflow_dir / kRegistryFile;
  if (!fs::exists(path)) throw NotFoundError("no registry at " + path.string());
  try {
    return record_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw IoError("corrupt registry " + path.string() + ": " + e.what());
  }
}

std::vector<Event> read_events(const fs::path& workflow_dir, std::uint64_t after_seq) {
  std::vector<Event> out;
  const auto path = workflow_dir / kEventsFile;
  if (!fs::exists(path)) return out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn tail
      throw IoError("corrupt event log line in " + path.string());
    }
    Event e = event_from_json(j);
    if (e.seq > after_seq) out.push_back(std::move(e));
  }
  return out;
}

std::map<std::string, StepStatus> replay_step_status(const std::vector<Event>& events) {
  std::map<std::string, StepStatus> out;
  for (const auto& e : events) {
    if (!e.payload.contains("step_id") || !e.payload.contains("status")) continue;
    out[e.payload["step_id"].get<std::string>()] = parse_step_status(e.payload["status"].get<std::string>());
  }
  return out;
}

Registry::Registry(fs::path dir, WorkflowRecord record, std::uint64_t seq)
    : dir_(std::move(dir)), record_(std::move(record)), seq_(seq) {}

std::unique_ptr<Registry> Registry::create(const fs::path& workflow_dir, WorkflowRecord record) {
  if (record.workflow_id.empty()) throw ConfigError("workflow_id must be non-empty");
  if (fs::exists(workflow_dir / kRegistryFile))
    throw ConflictError("registry already exists for workflow " + record.workflow_id);
  fs::create_directories(workflow_dir);
  record.created_at = record.updated_at = now_iso8601();
  std::unique_ptr<Registry> reg(new Registry(workflow_dir, std::move(record), 0));
  std::lock_guard lock(reg->mu_);
  reg->append_locked(EventKind::PHASE_CHANGE, {{"phase", to_string(reg->record_.phase)}});
  reg->persist_locked();
  return reg;
}

std::unique_ptr<Registry> Registry::open(const fs::path& workflow_dir) {
  WorkflowRecord record = load_record(workflow_dir);
  const auto events = read_events(workflow_dir);
  const std::uint64_t seq = events.empty() ? 0 : events.back().seq;
  return std::unique_ptr<Registry>(new Registry(workflow_dir, std::move(record), seq));
}

std::string Registry::workflow_id() const {
  std::lock_guard lock(mu_);
  return record_.workflow_id;
}

WorkflowRecord Registry::snapshot() const {
  std::lock_guard lock(mu_);
  return record_;
}

StepRecord Registry::step(const std::string& step_id) const {
  std::lock_guard lock(mu_);
  const auto it = record_.steps.find(step_id);
  if (it == record_.steps.end()) throw NotFoundError("no step '" + step_id + "' in registry");
  return it->second;
}

std::uint64_t Registry::last_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

StepRecord& Registry::step_locked(const std::string& step_id) {
  const auto it = record_.steps.find(step_id);
  if (it == record_.steps.end()) throw NotFoundError("no step '" + step_id + "' in registry");
  return it->second;
}

std::uint64_t Registry::append_locked(EventKind kind, json payload) {
  Event e{seq_ + 1, record_.workflow_id, kind, std::move(payload), now_iso8601()};
  try {
    append_line_durable(dir_ / kEventsFile, to_json(e).dump());
  } catch (const IoError& err) {
    record_.phase = WorkflowPhase::HALTED;
    record_.halt_reason = std::string("event log write failed: ") + err.what();
    std::cerr << "fatal: " << *record_.halt_reason << '\n';
    throw StorageError(*record_.halt_reason);
  }
  seq_ = e.seq;
  return seq_;
}

void Registry::persist_locked() {
  record_.updated_at = now_iso8601();
  try {
    persist(dir_, record_);
  } catch (const IoError& err) {
    record_.phase = WorkflowPhase::HALTED;
    record_.halt_reason = std::string("registry write failed: ") + err.what();
    std::cerr << "fatal: " << *record_.halt_reason << '\n';
    throw StorageError(*record_.halt_reason);
  }
}

void Registry::step_event_locked(EventKind kind, const StepRecord& s, json payload) {
  if (!payload.is_object()) payload = json::object();
  payload["step_id"] = s.step_id;
  payload["status"] = to_string(s.status);
  payload["attempts"] = s.attempts;
  append_locked(kind, std::move(payload));
}

std::set<std::string> Registry::resume(const std::string& graph_digest) {
  std::lock_guard lock(mu_);
  if (graph_digest != record_.graph_digest)
    throw DigestMismatch("cannot resume workflow " + record_.workflow_id +
                         ": the plan changed since it was created (graph digest " + record_.graph_digest.substr(0, 12) +
                         " recorded, " + graph_digest.substr(0, 12) + " rebuilt)");
  for (auto& [id, s] : record_.steps) {
    if (s.status != StepStatus::RUNNING) continue;
    s.status = StepStatus::PENDING;
    step_event_locked(EventKind::NOTE, s, {{"message", "demoted RUNNING step to PENDING on resume"}});
  }
  if (record_.phase == WorkflowPhase::HALTED && record_.halt_reason &&
      record_.halt_reason->rfind("interrupted", 0) == 0) {
    record_.halt_reason.reset();
    record_.phase = WorkflowPhase::PREPROCESSING;
  }
  append_locked(EventKind::NOTE, {{"message", "resumed"}, {"completed", record_.completed().size()}});
  persist_locked();
  return record_.completed();
}

void Registry::set_plan(const planner::WorkflowIntent& intent, const std::string& graph_digest,
                        const std::vector<std::pair<std::string, std::string>>& step_workspaces) {
  std::lock_guard lock(mu_);
  if (record_.phase != WorkflowPhase::DISTRIBUTION)
    throw ConflictError("the plan of workflow " + record_.workflow_id + " is fixed after DISTRIBUTION");
  record_.intent = intent;
  record_.graph_digest = graph_digest;
  for (const auto& [id, ws] : step_workspaces) {
    StepRecord s;
    s.step_id = id;
    s.workspace_path = ws;
    record_.steps[id] = s;
  }
  append_locked(EventKind::NOTE, {{"message", "plan fixed"}, {"graph_digest", graph_digest}, {"steps", step_workspaces.size()}});
  persist_locked();
}

void Registry::set_config(const json& config) {
  std::lock_guard lock(mu_);
  record_.config = config;
  persist_locked();
}

void Registry::set_phase(WorkflowPhase phase, const std::string& reason) {
  std::lock_guard lock(mu_);
  if (record_.phase == phase) return;
  record_.phase = phase;
  json payload{{"phase", to_string(phase)}};
  if (!reason.empty()) payload["reason"] = reason;
  append_locked(EventKind::PHASE_CHANGE, std::move(payload));
  persist_locked();
}

void Registry::halt(const std::string& reason) {
  std::lock_guard lock(mu_);
  record_.phase = WorkflowPhase::HALTED;
  record_.halt_reason = reason;
  append_locked(EventKind::PHASE_CHANGE, {{"phase", "HALTED"}, {"reason", reason}});
  persist_locked();
}

void Registry::add_step(const std::string& step_id, const std::string& workspace_path) {
  std::lock_guard lock(mu_);
  if (record_.steps.contains(step_id)) return;
  StepRecord s;
  s.step_id = step_id;
  s.workspace_path = workspace_path;
  record_.steps[step_id] = s;
  persist_locked();
}

int Registry::step_start(const std::string& step_id, const json& extra) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  if (s.status == StepStatus::COMPLETED) throw ConflictError("step '" + step_id + "' is already COMPLETED");
  if (s.status != StepStatus::RUNNING && s.started_at.empty()) s.started_at = now_iso8601();
  s.status = StepStatus::RUNNING;
  ++s.attempts;
  step_event_locked(EventKind::STEP_START, s, extra);
  persist_locked();
  return s.attempts;
}

void Registry::step_retry(const std::string& step_id, const std::string& error, const json& extra) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  s.last_error = error;
  json payload = extra.is_object() ? extra : json::object();
  payload["error"] = error;
  step_event_locked(EventKind::STEP_RETRY, s, std::move(payload));
  persist_locked();
}

void Registry::validation_fail(const std::string& step_id, const std::string& feedback, const json& report) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  s.last_error = feedback;
  step_event_locked(EventKind::VALIDATION_FAIL, s, {{"feedback", feedback}, {"report", report}});
  persist_locked();
}

void Registry::step_done(const std::string& step_id, const std::map<std::string, std::string>& outputs) {
  std::lock_guard lock(mu_);
  if (outputs.empty()) throw Error("step_done('" + step_id + "') requires outputs");
  auto& s = step_locked(step_id);
  s.status = StepStatus::COMPLETED;
  s.outputs = outputs;
  s.finished_at = now_iso8601();
  s.last_error.reset();
  step_event_locked(EventKind::STEP_DONE, s, {{"outputs", outputs}});
  persist_locked();
}

void Registry::step_fail(const std::string& step_id, const std::string& error) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  s.status = StepStatus::FAILED;
  s.last_error = error;
  s.finished_at = now_iso8601();
  step_event_locked(EventKind::STEP_FAIL, s, {{"error", error}});
  persist_locked();
}

void Registry::step_skip(const std::string& step_id, const std::string& reason) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  s.status = StepStatus::SKIPPED;
  step_event_locked(EventKind::NOTE, s, {{"message", reason}});
  persist_locked();
}

void Registry::step_interrupt(const std::string& step_id) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  if (s.status != StepStatus::RUNNING) return;
  s.status = StepStatus::PENDING;
  step_event_locked(EventKind::NOTE, s, {{"message", "interrupted"}});
  persist_locked();
}

void Registry::record_usage(const std::string& step_id, const planner::UsageStats& usage, double wall_seconds) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  s.prompt_tokens += usage.prompt_tokens;
  s.completion_tokens += usage.completion_tokens;
  s.wall_seconds += wall_seconds;
  persist_locked();
}

std::string Registry::open_approval(const std::string& step_id, const std::string& reason) {
  std::lock_guard lock(mu_);
  auto& s = step_locked(step_id);
  for (const auto& [_, a] : record_.approvals)
    if (a.step_id == step_id && a.decision == Decision::PENDING)
      throw ConflictError("step '" + step_id + "' already has a pending approval " + a.approval_id);
  ApprovalRequest a;
  a.approval_id = record_.workflow_id + ".a" + std::to_string(record_.approvals.size() + 1);
  a.workflow_id = record_.workflow_id;
  a.step_id = step_id;
  a.reason = reason;
  a.requested_at = now_iso8601();
  record_.approvals[a.approval_id] = a;
  s.status = StepStatus::AWAITING_APPROVAL;
  s.last_error = reason;
  step_event_locked(EventKind::APPROVAL_REQUESTED, s, {{"approval_id", a.approval_id}, {"reason", reason}});
  persist_locked();
  return a.approval_id;
}

void Registry::decide_approval(const std::string& approval_id, Decision decision, const std::string& note) {
  std::lock_guard lock(mu_);
  const auto it = record_.approvals.find(approval_id);
  if (it == record_.approvals.end()) throw NotFoundError("no approval '" + approval_id + "'");
  auto& a = it->second;
  if (a.decision != Decision::PENDING)
    throw ConflictError("approval " + approval_id + " was already decided (" + to_string(a.decision) + ")");
  if (decision == Decision::PENDING) throw ConfigError("a decision must be APPROVED, REJECTED, or RETRY");
  a.decision = decision;
  a.decided_at = now_iso8601();
  a.note = note;
  auto& s = step_locked(a.step_id);
  switch (decision) {
    case Decision::APPROVED:
      s.status = StepStatus::COMPLETED;
      s.human_override = true;
      s.provenance_note = "completed by human override (" + approval_id + ")" + (note.empty() ? "" : ": " + note);
      if (s.outputs.empty()) s.outputs["out"] = s.workspace_path + "/out";
      s.finished_at = a.decided_at;
      break;
    case Decision::REJECTED:
      s.status = StepStatus::FAILED;
      record_.phase = WorkflowPhase::HALTED;
      record_.halt_reason = "approval " + approval_id + " rejected" + (note.empty() ? "" : ": " + note);
      break;
    case Decision::RETRY:
      s.status = StepStatus::PENDING;
      s.attempts = 0;
      break;
    case Decision::PENDING:
      break;
  }
  step_event_locked(EventKind::APPROVAL_DECIDED, s,
                    {{"approval_id", approval_id}, {"decision", to_string(decision)}, {"note", note}});
  if (decision == Decision::REJECTED)
    append_locked(EventKind::PHASE_CHANGE, {{"phase", "HALTED"}, {"reason", *record_.halt_reason}});
  persist_locked();
}

std::vector<ApprovalRequest> Registry::pending_approvals() const {
  std::lock_guard lock(mu_);
  std::vector<ApprovalRequest> out;
  for (const auto& [_, a] : record_.approvals)
    if (a.decision == Decision::PENDING) out.push_back(a);
  return out;
}

std::uint64_t Registry::append_event(EventKind kind, json payload) {
  std::lock_guard lock(mu_);
  return append_locked(kind, std::move(payload));
}

void Registry::note(const std::string& message, json payload) {
  std::lock_guard lock(mu_);
  if (!payload.is_object()) payload = json::object();
  payload["message"] = message;
  append_locked(EventKind::NOTE, std::move(payload));
}

}  // namespace neuroflow::registry
