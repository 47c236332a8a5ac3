// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/common/io.hpp"
#include "neuroflow/common/random.hpp"
#include "neuroflow/registry/registry.hpp"
#include "support/temp_dir.hpp"

#include <doctest.h>

#include <array>
#include <fstream>
#include <thread>

using namespace neuroflow;
using namespace neuroflow::registry;

namespace {

WorkflowRecord fresh(const std::string& id = "wf-test") {
  WorkflowRecord r;
  r.workflow_id = id;
  r.prompt = "Classify AD using sMRI";
  return r;
}

std::unique_ptr<Registry> planned(const fs::path& dir, const std::vector<std::string>& steps) {
  auto reg = Registry::create(dir, fresh());
  std::vector<std::pair<std::string, std::string>> ws;
  for (const auto& s : steps) ws.emplace_back(s, s);
  planner::WorkflowIntent intent{{Modality::SMRI}, {DownstreamTask::CLASSIFICATION}, "p", "rule", 1};
  reg->set_plan(intent, "digest-1", ws);
  return reg;
}

void complete(Registry& reg, const std::string& id) {
  reg.step_start(id);
  reg.step_done(id, {{"out", id + "/out"}});
}

}  // namespace

TEST_CASE("persist then re-read is structurally identical") {
  testing::TempDir tmp;
  auto reg = planned(tmp.path(), {"a", "b"});
  complete(*reg, "a");
  reg->record_usage("a", {100, 20}, 1.5);
  reg->set_config({{"data_root", "/x"}});
  const auto before = reg->snapshot();
  const auto after = load_record(tmp.path());
  CHECK(to_json(after) == to_json(before));
  CHECK(record_from_json(to_json(before)).steps.at("a").outputs == before.steps.at("a").outputs);
  const auto doc = nlohmann::json::parse(read_file(tmp / kRegistryFile));
  CHECK(doc["schema_version"] == kSchemaVersion);
}

TEST_CASE("sequential persists fully replace the document") {
  testing::TempDir tmp;
  auto r = fresh();
  r.steps["x"].step_id = "x";
  persist(tmp.path(), r);
  r.steps.clear();
  r.prompt = "second";
  persist(tmp.path(), r);
  const auto back = load_record(tmp.path());
  CHECK(back.steps.empty());
  CHECK(back.prompt == "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("create refuses an existing registry; open resumes the sequence") {
  testing::TempDir tmp;
  auto reg = planned(tmp.path(), {"a"});
  CHECK_THROWS_AS(Registry::create(tmp.path(), fresh()), ConflictError);
  CHECK_THROWS_AS(Registry::create(tmp / "other", fresh("")), ConfigError);
  const auto seq = reg->last_seq();
  reg.reset();
  auto again = Registry::open(tmp.path());
  CHECK(again->last_seq() == seq);
  CHECK(again->append_event(EventKind::NOTE, {{"message", "hi"}}) == seq + 1);
  CHECK_THROWS_AS(Registry::open(tmp / "missing"), NotFoundError);
}

TEST_CASE("resume returns completed steps and demotes RUNNING") {
  testing::TempDir tmp;
  {
    auto reg = planned(tmp.path(), {"s1", "s2", "s3", "s4", "s5"});
    complete(*reg, "s1");
    complete(*reg, "s2");
    complete(*reg, "s3");
    reg->step_start("s4");
    reg->step_retry("s4", "boom");
    reg->step_start("s4");
  }
  auto reg = Registry::open(tmp.path());
  CHECK(reg->resume("digest-1") == std::set<std::string>{"s1", "s2", "s3"});
  CHECK(reg->step("s4").status == StepStatus::PENDING);
  CHECK(reg->step("s4").attempts == 2);
  CHECK(load_record(tmp.path()).steps.at("s4").status == StepStatus::PENDING);
  CHECK_THROWS_AS(reg->resume("digest-2"), DigestMismatch);
}

TEST_CASE("plan is fixed after DISTRIBUTION") {
  testing::TempDir tmp;
  auto reg = planned(tmp.path(), {"a"});
  reg->set_phase(WorkflowPhase::PREPROCESSING);
  CHECK_THROWS_AS(reg->set_plan({}, "d", {}), ConflictError);
  CHECK_THROWS_AS(reg->step_start("nope"), NotFoundError);
  CHECK_THROWS_AS(reg->step_done("a", {}), Error);
}

TEST_CASE("usage counters accumulate across retries") {
  testing::TempDir tmp;
  auto reg = planned(tmp.path(), {"a"});
  reg->step_start("a");
  reg->record_usage("a", {10, 3}, 0.5);
  reg->step_retry("a", "x");
  reg->step_start("a");
  reg->record_usage("a", {7, 2}, 0.25);
  const auto s = reg->step("a");
  CHECK(s.prompt_tokens == 17);
  CHECK(s.completion_tokens == 5);
  CHECK(s.wall_seconds == doctest::Approx(0.75));
  CHECK(s.attempts == 2);
  CHECK(reg->snapshot().total_prompt_tokens() == 17);
}

TEST_CASE("approval decisions and their effects") {
  testing::TempDir tmp;
  auto reg = planned(tmp.path(), {"a", "b", "c"});
  for (const auto& id : {"a", "b", "c"}) {
    reg->step_start(id);
    reg->step_fail(id, "missing out/x");
  }
  const auto ya = reg->open_approval("a", "missing out/x");
  const auto yb = reg->open_approval("b", "missing out/x");
  const auto yc = reg->open_approval("c", "missing out/x");
  CHECK(reg->step("a").status == StepStatus::AWAITING_APPROVAL);
  CHECK_THROWS_AS(reg->open_approval("a", "again"), ConflictError);
  CHECK(reg->pending_approvals().size() == 3);

  reg->decide_approval(ya, Decision::APPROVED, "looks fine");
  CHECK(reg->step("a").status == StepStatus::COMPLETED);
  CHECK(reg->step("a").human_override);
  CHECK(reg->step("a").provenance_note.find("looks fine") != std::string::npos);
  CHECK_FALSE(reg->step("a").outputs.empty());

  reg->decide_approval(yb, Decision::RETRY, "");
  CHECK(reg->step("b").status == StepStatus::PENDING);
  CHECK(reg->step("b").attempts == 0);

  reg->decide_approval(yc, Decision::REJECTED, "bad data");
  CHECK(reg->snapshot().phase == WorkflowPhase::HALTED);
  CHECK(reg->snapshot().halt_reason->find("bad data") != std::string::npos);

  CHECK_THROWS_AS(reg->decide_approval(ya, Decision::REJECTED, ""), ConflictError);
  CHECK_THROWS_AS(reg->decide_approval("wf-test.a99", Decision::APPROVED, ""), NotFoundError);
  CHECK(reg->pending_approvals().empty());
}

TEST_CASE("approval state machine: exactly one decision per request") {
  Rng rng(5);
  const std::array<Decision, 3> choices{Decision::APPROVED, Decision::REJECTED, Decision::RETRY};
  for (int trial = 0; trial < 20; ++trial) {
    testing::TempDir tmp;
    auto reg = planned(tmp.path(), {"s"});
    std::map<std::string, Decision> decided;
    std::vector<std::string> ids;
    for (int round = 0; round < 4; ++round) {
      reg->step_start("s");
      ids.push_back(reg->open_approval("s", "r" + std::to_string(round)));
      // A random burst of decisions against any known id; only the first on each sticks.
      for (int k = 0; k < 6; ++k) {
        const auto& id = ids[rng.index(ids.size())];
        const auto d = choices[rng.index(choices.size())];
        if (decided.contains(id)) {
          CHECK_THROWS_AS(reg->decide_approval(id, d, ""), ConflictError);
        } else {
          reg->decide_approval(id, d, "");
          decided[id] = d;
        }
      }
      if (!decided.contains(ids.back())) {
        reg->decide_approval(ids.back(), Decision::RETRY, "");
        decided[ids.back()] = Decision::RETRY;
      }
      if (reg->step("s").status == StepStatus::COMPLETED) break;
    }
    const auto snap = reg->snapshot();
    for (const auto& [id, d] : decided) CHECK(snap.approvals.at(id).decision == d);
    std::size_t decided_events = 0;
    for (const auto& e : read_events(tmp.path()))
      if (e.kind == EventKind::APPROVAL_DECIDED) ++decided_events;
    CHECK(decided_events == decided.size());
  }
}

TEST_CASE("events: strictly increasing seq and replay matches the registry") {
  testing::TempDir tmp;
  auto reg = planned(tmp.path(), {"a", "b", "c", "d"});
  complete(*reg, "a");
  reg->step_start("b");
  reg->step_retry("b", "e1");
  reg->validation_fail("b", "missing x", nlohmann::json::object());
  reg->step_fail("b", "gave up");
  const auto id = reg->open_approval("b", "gave up");
  reg->decide_approval(id, Decision::APPROVED, "");
  reg->step_skip("c", "not needed");
  reg->step_start("d");
  reg->step_interrupt("d");

  const auto events = read_events(tmp.path());
  REQUIRE(!events.empty());
  for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i].seq == events[i - 1].seq + 1);
  const auto replay = replay_step_status(events);
  for (const auto& [sid, s] : reg->snapshot().steps) CHECK_MESSAGE(replay.at(sid) == s.status, sid);
  CHECK(read_events(tmp.path(), events[3].seq).size() == events.size() - 4);

  // A torn final line is ignored.
  std::ofstream(tmp / kEventsFile, std::ios::app) << "{\"seq\": 9999, \"kind\": \"NO";
  CHECK(read_events(tmp.path()).size() == events.size());
}

TEST_CASE("concurrent writers serialize through the registry") {
  testing::TempDir tmp;
  std::vector<std::string> ids;
  for (int i = 0; i < 16; ++i) ids.push_back("s" + std::to_string(i));
  auto reg = planned(tmp.path(), ids);
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w)
    workers.emplace_back([&, w] {
      for (int i = w; i < 16; i += 4) complete(*reg, ids[i]);
    });
  for (auto& t : workers) t.join();
  CHECK(load_record(tmp.path()).completed().size() == 16);
  const auto events = read_events(tmp.path());
  for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i].seq > events[i - 1].seq);
}

TEST_CASE("enum tokens round trip") {
  for (auto s : {StepStatus::PENDING, StepStatus::RUNNING, StepStatus::COMPLETED, StepStatus::FAILED,
                 StepStatus::AWAITING_APPROVAL, StepStatus::SKIPPED})
    CHECK(parse_step_status(to_string(s)) == s);
  for (auto p : {WorkflowPhase::DISTRIBUTION, WorkflowPhase::PREPROCESSING, WorkflowPhase::INTEGRATION,
                 WorkflowPhase::TASK, WorkflowPhase::DONE, WorkflowPhase::HALTED})
    CHECK(parse_phase(to_string(p)) == p);
  CHECK(parse_decision("RETRY") == Decision::RETRY);
  CHECK_THROWS_AS(parse_decision("MAYBE"), ConfigError);
}
