// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/error.hpp"
#include "neuroflow/common/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace neuroflow::planner {

struct UsageStats {
  long prompt_tokens = 0;
  long completion_tokens = 0;

  UsageStats& operator+=(const UsageStats& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
};

struct WorkflowIntent {
  ModalitySet modalities;
  TaskSet tasks;
  std::string raw_prompt;
  std::string backend_id;
  int attempts_used = 1;
};

enum class ParseStatus { VALID, INVALID };

/// One backend invocation and what became of it.
struct ParseAttempt {
  int index = 1;
  std::string raw_response;
  std::string error;  // empty when the attempt parsed
};

struct ParseOutcome {
  ParseStatus status = ParseStatus::INVALID;
  std::optional<WorkflowIntent> intent;
  std::optional<std::string> failure_reason;
  std::vector<ParseAttempt> attempts;
  UsageStats usage;

  bool valid() const { return status == ParseStatus::VALID; }
};

enum class BackendKind { RULE_BASED, HTTP_CHAT };

struct BackendConfig {
  BackendKind kind = BackendKind::RULE_BASED;
  std::string endpoint_url;
  std::string model_name;
  double timeout_seconds = 120.0;
  int max_parse_retries = 3;

  /// Throws ConfigError when HTTP_CHAT lacks endpoint/model or retries < 1.
  void check() const;
  std::string id() const;
};

BackendConfig backend_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BackendConfig& b);

/// Keyword rules: "<keyword>\t<MODALITY|TASK>\t<token>", one per line, '#' comments.
class KeywordTable {
 public:
  struct Rule {
    std::string keyword;  // lower-case
    bool is_modality = true;
    Modality modality = Modality::SMRI;
    DownstreamTask task = DownstreamTask::CLASSIFICATION;
  };

  static KeywordTable parse(std::string_view text);
  static KeywordTable load(const std::filesystem::path& path);
  static KeywordTable load_default();

  const std::vector<Rule>& rules() const { return rules_; }

 private:
  std::vector<Rule> rules_;
};

/// Pure function of (prompt, table). A keyword matches at a word start in the lower-cased prompt.
ParseOutcome rule_based_parse(std::string_view prompt, const KeywordTable& table);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatReply {
  std::string text;
  UsageStats usage;
};

enum class TransportErrorKind { TIMEOUT, HTTP_STATUS, MALFORMED_BODY, UNREACHABLE };

class TransportError : public Error {
 public:
  TransportError(TransportErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  TransportErrorKind kind() const { return kind_; }

 private:
  TransportErrorKind kind_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws TransportError on transport-level failure.
  virtual ChatReply complete(const std::vector<ChatMessage>& messages) = 0;
  virtual std::string id() const = 0;
};

/// Chat-completion client: POST {model, messages, temperature: 0}.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);
  ChatReply complete(const std::vector<ChatMessage>& messages) override;
  std::string id() const override { return config_.id(); }

 private:
  BackendConfig config_;
};

ChatReply http_chat_complete(const std::vector<ChatMessage>& messages, const BackendConfig& backend);

/// Called once per backend attempt with the raw response (or transport error text).
using AttemptSink = std::function<void(const ParseAttempt&)>;

/// Parses `{"modalities": [...], "tasks": [...]}` after cutting the text down to its
/// outermost braces. Throws Error describing why the text is unparseable.
std::pair<ModalitySet, TaskSet> parse_structured_intent(std::string_view text);

std::string intent_system_prompt();

ParseOutcome parse_intent(std::string_view prompt, ChatBackend& backend, int max_parse_retries,
                          const AttemptSink& sink = {});

/// Dispatches on backend.kind; RULE_BASED uses the bundled keyword table.
ParseOutcome parse_intent(std::string_view prompt, const BackendConfig& backend,
                          const AttemptSink& sink = {});

nlohmann::json to_json(const WorkflowIntent& intent);
WorkflowIntent intent_from_json(const nlohmann::json& j);

}  // namespace neuroflow::planner
