// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/common/io.hpp"
#include "neuroflow/executor/workflow.hpp"
#include "neuroflow/registry/registry.hpp"
#include "support/gateway_harness.hpp"

#include <doctest.h>

#include <chrono>
#include <set>
#include <thread>

using namespace neuroflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using testing::follow;
using testing::kFourModalities;
using testing::omit_gtmseg_manifest;

struct Gateway : testing::Gateway {
  explicit Gateway(int subjects = 2) : testing::Gateway(NEUROFLOW_CLI_PATH, subjects) {}
};

void check_api_error(const testing::Reply& r, int status) { CHECK_MESSAGE(testing::is_api_error(r, status), r.raw); }

void check_coherent(const Gateway& gw) {
  for (const auto& url : testing::coherence_mismatches(gw)) FAIL_CHECK("GET " << url << " differs from the files");
}

}  // namespace

TEST_CASE("gateway: submission creates a registry and errors use the ApiError shape") {
  Gateway gw;
  const auto id = gw.submit("Classify AD using sMRI");
  CHECK(fs::exists(gw.workspace / id / "registry.json"));
  const auto rec = gw.get("/api/v1/workflows/" + id);
  CHECK(rec.status == 200);
  CHECK(rec.body.at("workflow_id") == id);

  check_api_error(gw.get("/api/v1/workflows/wf-nope"), 404);
  check_api_error(gw.get("/api/v1/workflows/wf-nope/events?since=0"), 404);
  check_api_error(gw.get("/api/v1/workflows/wf-nope/graph"), 404);
  check_api_error(gw.post("/api/v1/workflows/wf-nope/resume", json::object()), 404);
  check_api_error(gw.get("/api/v1/workflows/wf-nope/artifacts/registry.json"), 404);
  check_api_error(gw.get("/api/v1/nothing/here"), 404);
  check_api_error(gw.post("/api/v1/approvals/wf-nope.a1", {{"decision", "approve"}}), 404);

  check_api_error(gw.post("/api/v1/workflows", {{"data_root", gw.data.string()}}), 400);
  check_api_error(gw.post("/api/v1/workflows", {{"prompt", "x"}, {"data_root", (gw.tmp / "missing").string()}}), 400);
  check_api_error(gw.post("/api/v1/workflows", {{"prompt", "x"}, {"data_root", gw.data.string()}, {"config", 3}}), 400);
  check_api_error(gw.wrap(gw.client->Post("/api/v1/workflows", "{not json", "application/json")), 400);
  check_api_error(gw.get("/api/v1/workflows/" + id + "/events?since=-1"), 400);
  check_api_error(gw.get("/api/v1/workflows/" + id + "/events?since=abc"), 400);
  check_api_error(gw.get("/api/v1/approvals?status=maybe"), 400);

  follow(gw, id);
  gw.server->service().wait_idle();
  CHECK(gw.get("/api/v1/workflows/" + id).body.at("phase") == "DONE");
  check_api_error(gw.post("/api/v1/workflows/" + id + "/resume", json::object()), 409);
}

TEST_CASE("gateway: long-poll delivers every event exactly once across a full mock run") {
  Gateway gw(3);
  const auto id = gw.submit(kFourModalities);
  // Three independent consumers follow the run concurrently.
  std::vector<std::vector<json>> seen(3);
  std::vector<std::thread> consumers;
  for (auto& s : seen) consumers.emplace_back([&gw, &id, &s] { s = follow(gw, id); });
  for (auto& t : consumers) t.join();
  gw.server->service().wait_idle();

  const auto on_disk = testing::file_events(gw.workspace / id);
  REQUIRE_FALSE(on_disk.empty());
  for (const auto& s : seen) {
    REQUIRE(s.size() == on_disk.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].at("seq") == i + 1);
      CHECK(s[i] == on_disk[i]);
    }
    CHECK(s.back().at("kind") == "PHASE_CHANGE");
    CHECK(s.back().at("payload").at("phase") == "DONE");
  }
  // Past the end the poll returns promptly and empty.
  const auto tail = gw.get("/api/v1/workflows/" + id + "/events?since=" + std::to_string(on_disk.size()));
  CHECK(tail.body.at("events").empty());
  CHECK(tail.body.at("cursor") == on_disk.size());
  check_coherent(gw);
}

TEST_CASE("gateway: escalation, decisions and GET coherence with the files") {
  Gateway gw;
  const auto cfg = omit_gtmseg_manifest(gw.tmp.path());
  const auto id = gw.submit("Classify AD using sMRI", cfg);

  json pending;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
  while (std::chrono::steady_clock::now() < deadline) {
    pending = gw.get("/api/v1/approvals?status=pending").body.at("approvals");
    if (!pending.empty()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  REQUIRE(pending.size() == 1);
  const auto approval_id = pending[0].at("approval_id").get<std::string>();
  CHECK(pending[0].at("step_id") == "smri.gtmseg");
  CHECK(gw.server->service().active(id));
  check_coherent(gw);

  check_api_error(gw.post("/api/v1/approvals/" + approval_id, {{"decision", "maybe"}}), 400);
  const auto decided = gw.post("/api/v1/approvals/" + approval_id, {{"decision", "approve"}, {"note", "checked by hand"}});
  REQUIRE_MESSAGE(decided.status == 200, decided.raw);
  CHECK(decided.body.at("decision") == "APPROVED");
  CHECK(decided.body.at("note") == "checked by hand");
  // The step leaves AWAITING_APPROVAL as soon as the decision is recorded.
  CHECK(gw.get("/api/v1/workflows/" + id).body.at("steps").at("smri.gtmseg").at("status") == "COMPLETED");
  check_api_error(gw.post("/api/v1/approvals/" + approval_id, {{"decision", "reject"}}), 409);

  const auto events = follow(gw, id);
  CHECK(events.back().at("payload").at("phase") == "DONE");
  gw.server->service().wait_idle();
  const auto rec = gw.get("/api/v1/workflows/" + id).body;
  CHECK(rec.at("steps").at("smri.gtmseg").at("human_override") == true);
  check_coherent(gw);

  const auto graph = gw.get("/api/v1/workflows/" + id + "/graph").body;
  for (const auto& n : graph.at("nodes")) CHECK(n.at("status") == "COMPLETED");
}

TEST_CASE("gateway: resume continues an interrupted workflow and reports skipped steps") {
  Gateway gw;
  executor::RunConfig c;
  c.workspace_root = gw.workspace;
  c.data_root = gw.data;
  c.runner = NEUROFLOW_CLI_PATH;
  c.use_mocks = true;
  std::string id;
  {
    executor::WorkflowRunner first(c);
    const auto cut = first.start("Classify AD using sMRI", executor::InterruptPlan{3, std::nullopt});
    REQUIRE(cut.interrupted);
    id = cut.workflow_id;
  }
  const auto before = registry::load_record(gw.workspace / id).completed();
  REQUIRE(before.size() >= 3);

  const auto r = gw.post("/api/v1/workflows/" + id + "/resume", json::object());
  REQUIRE_MESSAGE(r.status == 200, r.raw);
  CHECK(r.body.at("resumed") == true);
  CHECK(r.body.at("skipped").get<std::set<std::string>>() == before);
  gw.server->service().wait_idle();
  CHECK(registry::load_record(gw.workspace / id).phase == registry::WorkflowPhase::DONE);
  check_api_error(gw.post("/api/v1/workflows/" + id + "/resume", json::object()), 409);
  check_coherent(gw);
}

TEST_CASE("gateway: artifacts are served from inside the workflow only") {
  Gateway gw;
  const auto id = gw.submit("Classify AD using sMRI");
  follow(gw, id);
  gw.server->service().wait_idle();
  const auto dir = gw.workspace / id;

  const auto reg = gw.get("/api/v1/workflows/" + id + "/artifacts/registry.json");
  CHECK(reg.status == 200);
  CHECK(reg.raw == read_file(dir / "registry.json"));
  check_api_error(gw.get("/api/v1/workflows/" + id + "/artifacts/../secret"), 400);
  check_api_error(gw.get("/api/v1/workflows/" + id + "/artifacts/%2e%2e/secret"), 400);
  check_api_error(gw.get("/api/v1/workflows/" + id + "/artifacts/nope.txt"), 404);
  check_api_error(gw.get("/api/v1/workflows/" + id + "/artifacts/smri.gtmseg"), 400);
}

TEST_CASE("gateway: 1000 adversarial artifact paths, zero escapes") {
  Gateway gw;
  const auto r = testing::artifact_fuzz(gw);
  for (const auto& a : r.anomalies) FAIL_CHECK(a);
  CHECK(r.escapes == 0);
  CHECK(r.served >= 3);
  CHECK(r.rejected > 500);
  MESSAGE("served " << r.served << ", rejected " << r.rejected << ", missing " << r.missing);
}
