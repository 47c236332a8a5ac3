// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/error.hpp"

#include <nlohmann/json.hpp>

#include <exception>
#include <string>

namespace neuroflow::gateway {

/// Body of every non-2xx response.
struct ApiError {
  int http_status = 500;
  std::string code;
  std::string message;

  nlohmann::json to_json() const;
};

class ApiException : public Error {
 public:
  ApiException(int http_status, std::string code, const std::string& message)
      : Error(message), error_{http_status, std::move(code), message} {}
  const ApiError& error() const { return error_; }

 private:
  ApiError error_;
};

/// ConfigError and JSON errors -> 400, NotFoundError -> 404, ConflictError -> 409, anything else -> 500.
ApiError to_api_error(const std::exception& e);

}  // namespace neuroflow::gateway
