// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

namespace neuroflow {

/// std::regex with `(?<name>...)` / `(?P<name>...)` named groups, which ECMAScript
/// regex in libstdc++ does not support. Names are stripped and mapped to group indices.
class NamedRegex {
 public:
  explicit NamedRegex(std::string_view pattern);

  /// First match anywhere in `text`; map of group name to captured text.
  std::optional<std::map<std::string, std::string>> search(const std::string& text) const;

  const std::string& pattern() const { return pattern_; }
  bool has_group(const std::string& name) const { return groups_.contains(name); }

 private:
  std::string pattern_;
  std::regex regex_;
  std::map<std::string, std::size_t> groups_;
};

}  // namespace neuroflow
