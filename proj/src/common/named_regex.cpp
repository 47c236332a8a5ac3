// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/common/named_regex.hpp"

#include "neuroflow/common/error.hpp"

namespace neuroflow {

NamedRegex::NamedRegex(std::string_view pattern) : pattern_(pattern) {
  std::string plain;
  std::size_t group = 0;
  bool in_class = false;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    if (c == '\\') {
      plain.push_back(c);
      if (i + 1 < pattern.size()) plain.push_back(pattern[++i]);
      continue;
    }
    if (in_class) {
      if (c == ']') in_class = false;
      plain.push_back(c);
      continue;
    }
    if (c == '[') {
      in_class = true;
      plain.push_back(c);
      continue;
    }
    if (c == '(') {
      if (i + 1 < pattern.size() && pattern[i + 1] == '?') {
        // (?<name>  or  (?P<name>
        std::size_t name_start = std::string_view::npos;
        if (i + 2 < pattern.size() && pattern[i + 2] == '<' && i + 3 < pattern.size() &&
            pattern[i + 3] != '=' && pattern[i + 3] != '!')
          name_start = i + 3;
        else if (i + 3 < pattern.size() && pattern[i + 2] == 'P' && pattern[i + 3] == '<')
          name_start = i + 4;
        if (name_start != std::string_view::npos) {
          const auto close = pattern.find('>', name_start);
          if (close == std::string_view::npos)
            throw ConfigError("unterminated group name in pattern: " + pattern_);
          groups_[std::string(pattern.substr(name_start, close - name_start))] = ++group;
          plain.push_back('(');
          i = close;
          continue;
        }
        // Non-capturing or lookahead: not counted.
        plain.push_back(c);
        continue;
      }
      ++group;
    }
    plain.push_back(c);
  }
  try {
    regex_ = std::regex(plain, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError("invalid pattern '" + pattern_ + "': " + e.what());
  }
}

std::optional<std::map<std::string, std::string>> NamedRegex::search(
    const std::string& text) const {
  std::smatch m;
  if (!std::regex_search(text, m, regex_)) return std::nullopt;
  std::map<std::string, std::string> out;
  for (const auto& [name, index] : groups_)
    if (index < m.size() && m[index].matched) out[name] = m[index].str();
  return out;
}

}  // namespace neuroflow
