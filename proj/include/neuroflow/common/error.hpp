// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace neuroflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (catalog, dependency table, run config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or storage failure.
class IoError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A state transition that is not allowed from the current state.
class ConflictError : public Error {
 public:
  using Error::Error;
};

}  // namespace neuroflow
