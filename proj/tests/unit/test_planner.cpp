// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/planner/intent.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <deque>
#include <thread>

using namespace neuroflow;
using namespace neuroflow::planner;

namespace {

/// Replays canned replies; a missing entry repeats the last one.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies, bool transport_failure = false)
      : replies_(std::move(replies)), fail_(transport_failure) {}

  ChatReply complete(const std::vector<ChatMessage>& messages) override {
    ++calls;
    last_messages = messages;
    if (fail_) throw TransportError(TransportErrorKind::UNREACHABLE, "connection refused");
    const auto& text = replies_[std::min<std::size_t>(calls - 1, replies_.size() - 1)];
    return {text, {10, 5}};
  }
  std::string id() const override { return "scripted"; }

  int calls = 0;
  std::vector<ChatMessage> last_messages;

 private:
  std::vector<std::string> replies_;
  bool fail_;
};

ParseOutcome rule(std::string_view prompt) { return rule_based_parse(prompt, KeywordTable::load_default()); }

/// Local chat-completion endpoint with a per-test handler.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  BackendConfig config(double timeout = 5.0) const {
    BackendConfig b;
    b.kind = BackendKind::HTTP_CHAT;
    b.endpoint_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    b.model_name = "test-model";
    b.timeout_seconds = timeout;
    return b;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content, bool with_usage = true) {
  nlohmann::json doc{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  if (with_usage) doc["usage"] = {{"prompt_tokens", 120}, {"completion_tokens", 30}};
  return doc.dump();
}

}  // namespace

TEST_CASE("rule-based parse: documented prompts") {
  const auto pet = rule("Train a 3D CNN to classify Alzheimer's Disease using Tau-PET images");
  REQUIRE(pet.valid());
  CHECK(pet.intent->modalities == ModalitySet{Modality::PET});
  CHECK(pet.intent->tasks == TaskSet{DownstreamTask::CLASSIFICATION});

  const auto fa = rule("Analyze diffusion FA decline with age");
  REQUIRE(fa.valid());
  CHECK(fa.intent->modalities == ModalitySet{Modality::DMRI});
  CHECK(fa.intent->tasks == TaskSet{DownstreamTask::CORRELATION_ANALYSIS});

  const auto two = rule("Classify AD using sMRI and Tau-PET");
  REQUIRE(two.valid());
  CHECK(two.intent->modalities == ModalitySet{Modality::SMRI, Modality::PET});
  CHECK(two.intent->tasks == TaskSet{DownstreamTask::CLASSIFICATION});

  const auto fc = rule("Study functional connectivity changes in AD patients");
  REQUIRE(fc.valid());
  CHECK(fc.intent->modalities.contains(Modality::FMRI));

  const auto none = rule("hello world");
  CHECK_FALSE(none.valid());
  CHECK_FALSE(none.intent);
  CHECK(none.failure_reason);
}

TEST_CASE("rule-based parse is a pure function of the prompt") {
  const std::string p = "Compare groups of amyloid PET and DTI, then predict age";
  const auto a = rule(p);
  const auto b = rule(p);
  REQUIRE(a.valid());
  CHECK(a.intent->modalities == b.intent->modalities);
  CHECK(a.intent->tasks == b.intent->tasks);
  CHECK(a.intent->attempts_used == 1);
}

TEST_CASE("keyword table rejects malformed lines") {
  CHECK_THROWS_AS(KeywordTable::parse("pet\tMODALITY\n"), ConfigError);
  CHECK_THROWS_AS(KeywordTable::parse("pet\tMODALITY\tNOT_A_MODALITY\n"), ConfigError);
  CHECK_THROWS_AS(KeywordTable::parse("pet\tTHING\tPET\n"), ConfigError);
  const auto t = KeywordTable::parse("# comment\n\npet\tMODALITY\tPET\n");
  CHECK(t.rules().size() == 1);
}

TEST_CASE("structured intent: brace extraction and closed vocabulary") {
  auto [m, t] = parse_structured_intent("Sure! {\"modalities\": [\"SMRI\", \"PET\"], \"tasks\": [\"CLASSIFICATION\"]} done");
  CHECK(m == ModalitySet{Modality::SMRI, Modality::PET});
  CHECK(t == TaskSet{DownstreamTask::CLASSIFICATION});
  CHECK_THROWS_AS(parse_structured_intent("{\"modalities\": [\"MRI\"], \"tasks\": []}"), Error);
  CHECK_THROWS_AS(parse_structured_intent("{\"modalities\": [], \"tasks\": [\"REGRESSION\"]}"), Error);
  CHECK_THROWS_AS(parse_structured_intent("no json at all"), Error);
  CHECK_THROWS_AS(parse_structured_intent("{\"modalities\": \"PET\", \"tasks\": []}"), Error);
}

TEST_CASE("parse_intent: retries then succeeds") {
  ScriptedBackend backend({"I think PET", "{\"modalities\": [\"PET\"], \"tasks\": [\"CLASSIFICATION\"]}"});
  std::vector<ParseAttempt> seen;
  const auto out = parse_intent("classify with tau pet", backend, 3, [&](const ParseAttempt& a) { seen.push_back(a); });
  REQUIRE(out.valid());
  CHECK(out.intent->attempts_used == 2);
  CHECK(backend.calls == 2);
  REQUIRE(seen.size() == 2);
  CHECK(seen[0].raw_response == "I think PET");
  CHECK_FALSE(seen[0].error.empty());
  CHECK(seen[1].error.empty());
  CHECK(out.usage.prompt_tokens == 20);
  // The retry prompt carries the failed reply back to the model.
  CHECK(backend.last_messages.size() == 4);
  CHECK(backend.last_messages[0].content.find("modalities") != std::string::npos);
}

TEST_CASE("parse_intent: invalid after exhausting retries") {
  ScriptedBackend backend({"not structured"});
  const auto out = parse_intent("anything", backend, 3);
  CHECK_FALSE(out.valid());
  CHECK(backend.calls == 3);
  CHECK(out.attempts.size() == 3);
  CHECK(out.failure_reason == "unparseable_output");
}

TEST_CASE("parse_intent: out-of-vocabulary token is never coerced") {
  ScriptedBackend backend({"{\"modalities\": [\"T1\"], \"tasks\": [\"CLASSIFICATION\"]}"});
  const auto out = parse_intent("anything", backend, 2);
  CHECK_FALSE(out.valid());
  CHECK(backend.calls == 2);
}

TEST_CASE("parse_intent: transport failures become backend_unreachable") {
  ScriptedBackend backend({""}, true);
  const auto out = parse_intent("anything", backend, 3);
  CHECK_FALSE(out.valid());
  CHECK(backend.calls == 3);
  CHECK(out.failure_reason == "backend_unreachable");
}

TEST_CASE("backend config checks") {
  BackendConfig b;
  b.kind = BackendKind::HTTP_CHAT;
  CHECK_THROWS_AS(b.check(), ConfigError);
  b.endpoint_url = "http://localhost:1/x";
  b.model_name = "m";
  CHECK_NOTHROW(b.check());
  b.max_parse_retries = 0;
  CHECK_THROWS_AS(b.check(), ConfigError);
  BackendConfig r;
  r.max_parse_retries = 2;
  CHECK(backend_from_json(to_json(r)).max_parse_retries == 2);
  CHECK_THROWS_AS(parse_intent("   ", BackendConfig{}), Error);
}

TEST_CASE("http chat backend: wire format and usage") {
  std::atomic<int> hits{0};
  nlohmann::json last_request;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    last_request = nlohmann::json::parse(req.body);
    res.set_content(completion("{\"modalities\": [\"FMRI\"], \"tasks\": [\"GROUP_ANALYSIS\"]}"), "application/json");
  });
  const auto reply = http_chat_complete({{"user", "hi"}}, server.config());
  CHECK(reply.usage.prompt_tokens == 120);
  CHECK(reply.usage.completion_tokens == 30);
  CHECK(last_request["model"] == "test-model");
  CHECK(last_request["temperature"] == 0);
  CHECK(last_request["messages"][0]["content"] == "hi");

  const auto out = parse_intent("compare groups in fmri", server.config());
  REQUIRE(out.valid());
  CHECK(out.intent->modalities == ModalitySet{Modality::FMRI});
  CHECK(out.intent->backend_id.find("test-model") != std::string::npos);
}

TEST_CASE("http chat backend: missing usage reports zeros") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("hello", false), "application/json");
  });
  const auto reply = http_chat_complete({{"user", "hi"}}, server.config());
  CHECK(reply.text == "hello");
  CHECK(reply.usage.prompt_tokens == 0);
  CHECK(reply.usage.completion_tokens == 0);
}

TEST_CASE("http chat backend: typed transport errors") {
  auto kind_of = [](const BackendConfig& b) {
    try {
      http_chat_complete({{"user", "hi"}}, b);
    } catch (const TransportError& e) {
      return std::optional(e.kind());
    }
    return std::optional<TransportErrorKind>();
  };
  {
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    CHECK(kind_of(server.config()) == TransportErrorKind::HTTP_STATUS);
  }
  {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"choices\": []}", "application/json");
    });
    CHECK(kind_of(server.config()) == TransportErrorKind::MALFORMED_BODY);
  }
  {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(800));
      res.set_content(completion("late"), "application/json");
    });
    CHECK(kind_of(server.config(0.2)) == TransportErrorKind::TIMEOUT);
  }
  BackendConfig dead;
  dead.kind = BackendKind::HTTP_CHAT;
  dead.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  dead.model_name = "m";
  CHECK(kind_of(dead) == TransportErrorKind::UNREACHABLE);
}

TEST_CASE("intent JSON round trip") {
  WorkflowIntent i{{Modality::SMRI, Modality::TABULAR}, {DownstreamTask::REGRESSION}, "p", "rule", 1};
  const auto back = intent_from_json(to_json(i));
  CHECK(back.modalities == i.modalities);
  CHECK(back.tasks == i.tasks);
  CHECK(back.raw_prompt == "p");
}
