// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/error.hpp"
#include "neuroflow/planner/intent.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace neuroflow::registry {

inline constexpr int kSchemaVersion = 1;

enum class StepStatus { PENDING, RUNNING, COMPLETED, FAILED, AWAITING_APPROVAL, SKIPPED };
enum class WorkflowPhase { DISTRIBUTION, PREPROCESSING, INTEGRATION, TASK, DONE, HALTED };
enum class EventKind {
  PHASE_CHANGE,
  STEP_START,
  STEP_RETRY,
  STEP_DONE,
  STEP_FAIL,
  VALIDATION_FAIL,
  APPROVAL_REQUESTED,
  APPROVAL_DECIDED,
  NOTE
};
enum class Decision { PENDING, APPROVED, REJECTED, RETRY };

std::string to_string(StepStatus s);
std::string to_string(WorkflowPhase p);
std::string to_string(EventKind k);
std::string to_string(Decision d);
StepStatus parse_step_status(const std::string& s);
WorkflowPhase parse_phase(const std::string& s);
EventKind parse_event_kind(const std::string& s);
Decision parse_decision(const std::string& s);

struct StepRecord {
  std::string step_id;
  StepStatus status = StepStatus::PENDING;
  int attempts = 0;
  std::string started_at;
  std::string finished_at;
  double wall_seconds = 0.0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  std::string workspace_path;  // relative to the workflow directory
  std::optional<std::string> last_error;
  /// Output key -> path relative to the workflow directory. "out" is always the step's out/.
  std::map<std::string, std::string> outputs;
  bool human_override = false;
  std::string provenance_note;
};

struct ApprovalRequest {
  std::string approval_id;
  std::string workflow_id;
  std::string step_id;
  std::string reason;
  std::string requested_at;
  Decision decision = Decision::PENDING;
  std::string decided_at;
  std::string note;
};

struct WorkflowRecord {
  std::string workflow_id;
  std::string prompt;
  planner::WorkflowIntent intent;
  std::string graph_digest;
  WorkflowPhase phase = WorkflowPhase::DISTRIBUTION;
  std::map<std::string, StepRecord> steps;
  std::map<std::string, ApprovalRequest> approvals;
  std::string created_at;
  std::string updated_at;
  std::optional<std::string> halt_reason;
  /// Run configuration needed to resume (data root, mode, limits).
  nlohmann::json config = nlohmann::json::object();

  std::set<std::string> completed() const;
  long total_prompt_tokens() const;
  long total_completion_tokens() const;
};

struct Event {
  std::uint64_t seq = 0;
  std::string workflow_id;
  EventKind kind = EventKind::NOTE;
  nlohmann::json payload = nlohmann::json::object();
  std::string at;
};

nlohmann::json to_json(const StepRecord& s);
StepRecord step_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ApprovalRequest& a);
ApprovalRequest approval_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WorkflowRecord& r);
WorkflowRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

inline constexpr const char* kRegistryFile = "registry.json";
inline constexpr const char* kEventsFile = "events.jsonl";

/// Atomic (temp + rename) write of the registry document.
void persist(const std::filesystem::path& workflow_dir, const WorkflowRecord& record);
/// Lock-free snapshot read of a persisted registry.
WorkflowRecord load_record(const std::filesystem::path& workflow_dir);
/// Events with seq > after_seq, in order. A torn final line (crash mid-append) is ignored.
std::vector<Event> read_events(const std::filesystem::path& workflow_dir, std::uint64_t after_seq = 0);
/// Step status reconstructed purely from the event log.
std::map<std::string, StepStatus> replay_step_status(const std::vector<Event>& events);

class StorageError : public IoError {
 public:
  using IoError::IoError;
};

/// Raised by resume when the rebuilt plan's digest differs from the recorded one.
class DigestMismatch : public ConflictError {
 public:
  using ConflictError::ConflictError;
};

/// The single writer for one workflow. Every mutation takes the lock, updates the
/// in-memory record, appends the event durably, then persists the document.
class Registry {
 public:
  /// Fresh workflow; the directory must not already hold a registry.
  static std::unique_ptr<Registry> create(const std::filesystem::path& workflow_dir, WorkflowRecord record);
  static std::unique_ptr<Registry> open(const std::filesystem::path& workflow_dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::string workflow_id() const;
  WorkflowRecord snapshot() const;
  StepRecord step(const std::string& step_id) const;
  std::uint64_t last_seq() const;

  /// Demotes RUNNING steps to PENDING (attempts kept) and returns the COMPLETED set.
  /// Throws DigestMismatch when the plan changed.
  std::set<std::string> resume(const std::string& graph_digest);

  /// Fixes intent, graph digest and step set. Only legal during DISTRIBUTION.
  void set_plan(const planner::WorkflowIntent& intent, const std::string& graph_digest,
                const std::vector<std::pair<std::string, std::string>>& step_workspaces);
  void set_config(const nlohmann::json& config);

  void set_phase(WorkflowPhase phase, const std::string& reason = {});
  void halt(const std::string& reason);
  void add_step(const std::string& step_id, const std::string& workspace_path);

  /// PENDING -> RUNNING, attempts + 1. Returns the new attempt count.
  int step_start(const std::string& step_id, const nlohmann::json& extra = nlohmann::json::object());
  /// Records a failed attempt that will be retried (status stays RUNNING).
  void step_retry(const std::string& step_id, const std::string& error, const nlohmann::json& extra = {});
  void validation_fail(const std::string& step_id, const std::string& feedback, const nlohmann::json& report);
  void step_done(const std::string& step_id, const std::map<std::string, std::string>& outputs);
  void step_fail(const std::string& step_id, const std::string& error);
  void step_skip(const std::string& step_id, const std::string& reason);
  /// Demote a RUNNING step back to PENDING (interruption, not a fault).
  void step_interrupt(const std::string& step_id);

  void record_usage(const std::string& step_id, const planner::UsageStats& usage, double wall_seconds);

  /// Step -> AWAITING_APPROVAL; returns the new approval id.
  std::string open_approval(const std::string& step_id, const std::string& reason);
  /// Throws ConflictError unless the request is PENDING, NotFoundError for unknown ids.
  void decide_approval(const std::string& approval_id, Decision decision, const std::string& note);
  std::vector<ApprovalRequest> pending_approvals() const;

  std::uint64_t append_event(EventKind kind, nlohmann::json payload);
  void note(const std::string& message, nlohmann::json payload = nlohmann::json::object());

 private:
  Registry(std::filesystem::path dir, WorkflowRecord record, std::uint64_t seq);

  StepRecord& step_locked(const std::string& step_id);
  std::uint64_t append_locked(EventKind kind, nlohmann::json payload);
  void persist_locked();
  void step_event_locked(EventKind kind, const StepRecord& s, nlohmann::json payload);

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  WorkflowRecord record_;
  std::uint64_t seq_ = 0;
};

}  // namespace neuroflow::registry
