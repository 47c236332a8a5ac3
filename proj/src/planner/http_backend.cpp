// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/planner/intent.hpp"

#include <httplib.h>

#include <cmath>

namespace neuroflow::planner {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http")
    throw ConfigError("only plain http endpoints are supported (got " + scheme + ")");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  if (config_.kind != BackendKind::HTTP_CHAT) throw ConfigError("HttpChatBackend needs an HTTP_CHAT config");
  config_.check();
}

ChatReply HttpChatBackend::complete(const std::vector<ChatMessage>& messages) {
  return http_chat_complete(messages, config_);
}

ChatReply http_chat_complete(const std::vector<ChatMessage>& messages, const BackendConfig& backend) {
  if (backend.kind != BackendKind::HTTP_CHAT) throw ConfigError("http_chat_complete requires HTTP_CHAT");
  backend.check();
  const Endpoint ep = split_url(backend.endpoint_url);

  json body{{"model", backend.model_name}, {"temperature", 0}, {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  httplib::Client client(ep.origin);
  const auto secs = static_cast<time_t>(std::floor(backend.timeout_seconds));
  const auto usecs = static_cast<time_t>((backend.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  auto res = client.Post(ep.path, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                          ? TransportErrorKind::TIMEOUT
                          : TransportErrorKind::UNREACHABLE;
    throw TransportError(kind, "chat backend request failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300)
    throw TransportError(TransportErrorKind::HTTP_STATUS,
                         "chat backend returned HTTP " + std::to_string(res->status));

  ChatReply reply;
  try {
    const json doc = json::parse(res->body);
    reply.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
      reply.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
      reply.usage.completion_tokens = doc["usage"].value("completion_tokens", 0L);
    }
  } catch (const json::exception& e) {
    throw TransportError(TransportErrorKind::MALFORMED_BODY,
                         std::string("malformed chat response: ") + e.what());
  }
  return reply;
}

}  // namespace neuroflow::planner
