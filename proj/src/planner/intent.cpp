// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/planner/intent.hpp"

#include "neuroflow/common/io.hpp"

#include <cctype>
#include <sstream>

namespace neuroflow::planner {

using nlohmann::json;

void BackendConfig::check() const {
  if (max_parse_retries < 1) throw ConfigError("max_parse_retries must be >= 1");
  if (kind == BackendKind::HTTP_CHAT && (endpoint_url.empty() || model_name.empty()))
    throw ConfigError("HTTP_CHAT backend requires endpoint_url and model_name");
}

std::string BackendConfig::id() const {
  return kind == BackendKind::RULE_BASED ? std::string("rule_based") : "http:" + model_name;
}

BackendConfig backend_from_json(const json& j) {
  BackendConfig b;
  const auto kind = to_upper(j.value("kind", std::string("RULE_BASED")));
  if (kind == "RULE_BASED")
    b.kind = BackendKind::RULE_BASED;
  else if (kind == "HTTP_CHAT")
    b.kind = BackendKind::HTTP_CHAT;
  else
    throw ConfigError("unknown backend kind: " + kind);
  b.endpoint_url = j.value("endpoint_url", std::string{});
  b.model_name = j.value("model_name", std::string{});
  b.timeout_seconds = j.value("timeout", 120.0);
  b.max_parse_retries = j.value("max_parse_retries", 3);
  b.check();
  return b;
}

json to_json(const BackendConfig& b) {
  return {{"kind", b.kind == BackendKind::RULE_BASED ? "RULE_BASED" : "HTTP_CHAT"},
          {"endpoint_url", b.endpoint_url},
          {"model_name", b.model_name},
          {"timeout", b.timeout_seconds},
          {"max_parse_retries", b.max_parse_retries}};
}

KeywordTable KeywordTable::parse(std::string_view text) {
  KeywordTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3)
      throw ConfigError("keyword table line " + std::to_string(lineno) + ": expected 3 tab-separated columns");
    Rule r;
    r.keyword = to_lower(trim(cols[0]));
    const auto kind = to_upper(trim(cols[1]));
    if (kind == "MODALITY") {
      const auto m = parse_modality(cols[2]);
      if (!m) throw ConfigError("keyword table line " + std::to_string(lineno) + ": unknown modality " + cols[2]);
      r.is_modality = true;
      r.modality = *m;
    } else if (kind == "TASK") {
      const auto t = parse_task(cols[2]);
      if (!t) throw ConfigError("keyword table line " + std::to_string(lineno) + ": unknown task " + cols[2]);
      r.is_modality = false;
      r.task = *t;
    } else {
      throw ConfigError("keyword table line " + std::to_string(lineno) + ": kind must be MODALITY or TASK");
    }
    if (r.keyword.empty()) throw ConfigError("keyword table line " + std::to_string(lineno) + ": empty keyword");
    table.rules_.push_back(std::move(r));
  }
  return table;
}

KeywordTable KeywordTable::load(const std::filesystem::path& path) { return parse(read_file(path)); }

KeywordTable KeywordTable::load_default() { return load(default_data_dir() / "intent_keywords.tsv"); }

namespace {

bool matches_at_word_start(const std::string& haystack, const std::string& keyword) {
  std::size_t pos = haystack.find(keyword);
  while (pos != std::string::npos) {
    if (pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]))) return true;
    pos = haystack.find(keyword, pos + 1);
  }
  return false;
}

}  // namespace

ParseOutcome rule_based_parse(std::string_view prompt, const KeywordTable& table) {
  const std::string lower = to_lower(prompt);
  WorkflowIntent intent;
  intent.raw_prompt = std::string(prompt);
  intent.backend_id = "rule_based";
  intent.attempts_used = 1;
  for (const auto& rule : table.rules()) {
    if (!matches_at_word_start(lower, rule.keyword)) continue;
    if (rule.is_modality)
      intent.modalities.insert(rule.modality);
    else
      intent.tasks.insert(rule.task);
  }
  ParseOutcome out;
  ParseAttempt attempt{1, "", ""};
  if (intent.modalities.empty()) {
    out.status = ParseStatus::INVALID;
    out.failure_reason = "no_modality_keyword";
    attempt.error = "no modality keyword matched";
  } else {
    out.status = ParseStatus::VALID;
    attempt.raw_response = to_json(intent).dump();
    out.intent = std::move(intent);
  }
  out.attempts.push_back(std::move(attempt));
  return out;
}

std::pair<ModalitySet, TaskSet> parse_structured_intent(std::string_view text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw Error("no JSON object in response");
  json doc;
  try {
    doc = json::parse(text.substr(open, close - open + 1));
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("structured output is not an object");
  for (const char* key : {"modalities", "tasks"})
    if (!doc.contains(key) || !doc.at(key).is_array())
      throw Error(std::string("missing array key '") + key + "'");

  ModalitySet modalities;
  for (const auto& item : doc.at("modalities")) {
    if (!item.is_string()) throw Error("modality entries must be strings");
    const auto m = parse_modality(item.get<std::string>());
    if (!m) throw Error("modality outside vocabulary: " + item.get<std::string>());
    modalities.insert(*m);
  }
  TaskSet tasks;
  for (const auto& item : doc.at("tasks")) {
    if (!item.is_string()) throw Error("task entries must be strings");
    const auto t = parse_task(item.get<std::string>());
    if (!t) throw Error("task outside vocabulary: " + item.get<std::string>());
    tasks.insert(*t);
  }
  if (modalities.empty()) throw Error("empty modality set");
  return {modalities, tasks};
}

std::string intent_system_prompt() {
  std::string modalities;
  for (Modality m : kAllModalities) modalities += (modalities.empty() ? "" : ", ") + std::string(to_string(m));
  std::string tasks;
  for (DownstreamTask t : kAllTasks) tasks += (tasks.empty() ? "" : ", ") + std::string(to_string(t));
  return "You route neuroimaging research requests to processing agents. Identify the data "
         "modalities the request needs and the downstream analysis tasks it asks for. Reply with "
         "one JSON object and nothing else, with exactly two keys: \"modalities\" (array drawn from: " +
         modalities + ") and \"tasks\" (array drawn from: " + tasks + ").";
}

ParseOutcome parse_intent(std::string_view prompt, ChatBackend& backend, int max_parse_retries,
                          const AttemptSink& sink) {
  if (trim(prompt).empty()) throw Error("parse_intent: prompt must be non-empty");
  if (max_parse_retries < 1) throw ConfigError("max_parse_retries must be >= 1");

  std::vector<ChatMessage> messages{{"system", intent_system_prompt()},
                                    {"user", std::string(prompt)}};
  ParseOutcome out;
  bool last_was_transport = false;
  for (int attempt = 1; attempt <= max_parse_retries; ++attempt) {
    ParseAttempt record{attempt, "", ""};
    try {
      ChatReply reply = backend.complete(messages);
      out.usage += reply.usage;
      record.raw_response = reply.text;
      last_was_transport = false;
      try {
        auto [modalities, tasks] = parse_structured_intent(reply.text);
        WorkflowIntent intent{std::move(modalities), std::move(tasks), std::string(prompt),
                              backend.id(), attempt};
        out.attempts.push_back(record);
        if (sink) sink(record);
        out.status = ParseStatus::VALID;
        out.intent = std::move(intent);
        return out;
      } catch (const Error& e) {
        record.error = e.what();
        messages.push_back({"assistant", reply.text});
        messages.push_back({"user", std::string("Your reply could not be used (") + e.what() +
                                        "). Reply with only the JSON object."});
      }
    } catch (const TransportError& e) {
      record.error = std::string("transport: ") + e.what();
      last_was_transport = true;
    }
    out.attempts.push_back(record);
    if (sink) sink(record);
  }
  out.status = ParseStatus::INVALID;
  out.failure_reason = last_was_transport ? "backend_unreachable" : "unparseable_output";
  return out;
}

ParseOutcome parse_intent(std::string_view prompt, const BackendConfig& backend,
                          const AttemptSink& sink) {
  backend.check();
  if (trim(prompt).empty()) throw Error("parse_intent: prompt must be non-empty");
  if (backend.kind == BackendKind::RULE_BASED) {
    ParseOutcome out = rule_based_parse(prompt, KeywordTable::load_default());
    if (sink)
      for (const auto& a : out.attempts) sink(a);
    return out;
  }
  HttpChatBackend http(backend);
  return parse_intent(prompt, http, backend.max_parse_retries, sink);
}

json to_json(const WorkflowIntent& intent) {
  json modalities = json::array();
  for (Modality m : intent.modalities) modalities.push_back(to_string(m));
  json tasks = json::array();
  for (DownstreamTask t : intent.tasks) tasks.push_back(to_string(t));
  return {{"modalities", modalities},
          {"tasks", tasks},
          {"raw_prompt", intent.raw_prompt},
          {"backend_id", intent.backend_id},
          {"attempts_used", intent.attempts_used}};
}

WorkflowIntent intent_from_json(const json& j) {
  WorkflowIntent intent;
  for (const auto& m : j.at("modalities")) {
    const auto parsed = parse_modality(m.get<std::string>());
    if (!parsed) throw ConfigError("unknown modality in intent: " + m.get<std::string>());
    intent.modalities.insert(*parsed);
  }
  for (const auto& t : j.at("tasks")) {
    const auto parsed = parse_task(t.get<std::string>());
    if (!parsed) throw ConfigError("unknown task in intent: " + t.get<std::string>());
    intent.tasks.insert(*parsed);
  }
  intent.raw_prompt = j.value("raw_prompt", std::string{});
  intent.backend_id = j.value("backend_id", std::string{});
  intent.attempts_used = j.value("attempts_used", 1);
  return intent;
}

}  // namespace neuroflow::planner
