// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/bench/metrics.hpp"

#include "neuroflow/common/error.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

namespace neuroflow::bench {

namespace {

/// Assignment target of a statement line ("OUTPUT_DIR = ..."), or empty.
std::string assignment_target(std::string_view line) {
  static const std::regex re(R"(^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?::[^=]*)?=[^=])");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(line.begin(), line.end(), m, re)) return m[1].str();
  return {};
}

bool names_output(const std::string& target) {
  std::string lower;
  for (char ch : target) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return lower.find("out") != std::string::npos;
}

std::string strip_trailing_slash(std::string p) {
  while (p.size() > 1 && p.back() == '/') p.pop_back();
  return p;
}

}  // namespace

std::vector<PathLiteral> extract_path_literals(std::string_view s) {
  std::vector<PathLiteral> out;
  std::size_t line = 1;
  int depth = 0;  // bracket nesting; continuation lines keep the statement's target
  std::string target;
  bool at_line_start = true;

  for (std::size_t i = 0; i < s.size();) {
    if (at_line_start) {
      if (depth == 0) {
        const auto end = s.find('\n', i);
        target = assignment_target(s.substr(i, end == std::string_view::npos ? s.size() - i : end - i));
      }
      at_line_start = false;
    }
    const char c = s[i];
    if (c == '\n') {
      ++line;
      at_line_start = true;
      ++i;
    } else if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
      ++i;
    } else if (c == ')' || c == ']' || c == '}') {
      depth = std::max(0, depth - 1);
      ++i;
    } else if (c == '"' || c == '\'') {
      if (s.substr(i, 3) == std::string(3, c)) {
        // Triple-quoted: docstrings and prose, never path literals.
        const auto close = s.find(std::string(3, c), i + 3);
        const auto stop = close == std::string_view::npos ? s.size() : close + 3;
        line += static_cast<std::size_t>(std::count(s.begin() + i, s.begin() + stop, '\n'));
        i = stop;
        continue;
      }
      std::string text;
      std::size_t j = i + 1;
      for (; j < s.size() && s[j] != c && s[j] != '\n'; ++j) {
        if (s[j] == '\\' && j + 1 < s.size() && s[j + 1] != '\n') {
          text += s[j];
          ++j;
        }
        text += s[j];
      }
      if (text.find('/') != std::string::npos && text.find('{') == std::string::npos)
        out.push_back({text, line, names_output(target)});
      i = (j < s.size() && s[j] == c) ? j + 1 : j;
    } else {
      ++i;
    }
  }
  return out;
}

bool grounded_in(const std::string& path, const std::vector<std::string>& listing) {
  const auto p = strip_trailing_slash(path);
  for (const auto& raw : listing) {
    const auto e = strip_trailing_slash(raw);
    if (e == p) return true;
    if (p == "/" ? e.starts_with("/") : e.size() > p.size() && e.starts_with(p) && e[p.size()] == '/') return true;
  }
  return false;
}

bool under_root(const std::string& path, const std::string& root) {
  const auto r = strip_trailing_slash(root);
  const auto p = strip_trailing_slash(path);
  if (p == r) return true;
  if (r == "/") return p.starts_with("/");
  return p.size() > r.size() && p.starts_with(r) && p[r.size()] == '/';
}

PairScore pair_f1(const std::set<integrator::SubjectKey>& predicted, const std::set<integrator::SubjectKey>& gold) {
  PairScore s;
  s.predicted = predicted.size();
  s.gold = gold.size();
  for (const auto& k : predicted) s.true_positives += gold.count(k);
  s.precision = s.predicted ? static_cast<double>(s.true_positives) / static_cast<double>(s.predicted) : 0.0;
  s.recall = s.gold ? static_cast<double>(s.true_positives) / static_cast<double>(s.gold) : 0.0;
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

CanonicalTable canonical_table(const csv::Table& table, const integrator::ColumnAliases& aliases) {
  std::map<std::string, std::size_t> index;  // canonical name -> source column
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    const auto name = aliases.canonicalize(table.header[i]);
    if (!index.emplace(name, i).second) throw Error("column '" + name + "' appears twice after aliasing");
  }
  for (const char* required : {"SubjectID", "Date"})
    if (!index.contains(required)) throw Error(std::string("missing column ") + required);

  CanonicalTable t;
  t.columns = integrator::canonical_columns();
  std::vector<std::string> extras;
  for (const auto& [name, _] : index)
    if (std::find(t.columns.begin(), t.columns.end(), name) == t.columns.end()) extras.push_back(name);
  t.columns.insert(t.columns.end(), extras.begin(), extras.end());  // map order is sorted

  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw Error("ragged row in manifest table");
    csv::Row r;
    for (const auto& col : t.columns) {
      const auto it = index.find(col);
      r.push_back(it == index.end() ? std::string{} : row[it->second]);
    }
    t.rows.push_back(std::move(r));
  }
  std::sort(t.rows.begin(), t.rows.end());
  return t;
}

std::optional<std::string> cell(const CanonicalTable& t, const std::string& subject, const std::string& date,
                                const std::string& column) {
  const auto col = std::find(t.columns.begin(), t.columns.end(), column);
  if (col == t.columns.end()) return std::nullopt;
  const auto ci = static_cast<std::size_t>(col - t.columns.begin());
  for (const auto& row : t.rows)
    if (row[0] == subject && row[1] == date) return row[ci];
  return std::nullopt;
}

}  // namespace neuroflow::bench
