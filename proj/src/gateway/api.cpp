// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/gateway/api.hpp"

namespace neuroflow::gateway {

nlohmann::json ApiError::to_json() const {
  return {{"http_status", http_status}, {"code", code}, {"message", message}};
}

ApiError to_api_error(const std::exception& e) {
  if (const auto* api = dynamic_cast<const ApiException*>(&e)) return api->error();
  if (dynamic_cast<const NotFoundError*>(&e)) return {404, "not_found", e.what()};
  if (dynamic_cast<const ConflictError*>(&e)) return {409, "conflict", e.what()};
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e))
    return {400, "bad_request", e.what()};
  return {500, "internal", e.what()};
}

}  // namespace neuroflow::gateway
