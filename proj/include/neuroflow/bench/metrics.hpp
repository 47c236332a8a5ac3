// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/csv.hpp"
#include "neuroflow/integrator/manifest.hpp"

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace neuroflow::bench {

/// A quoted string literal that looks like a filesystem path.
struct PathLiteral {
  std::string text;
  std::size_t line = 0;  // 1-based
  bool is_output = false;
};

/// Scans script text for single- or double-quoted literals containing '/'. Triple-quoted
/// strings, comments and literals with '{' (format templates) are skipped. A literal is an
/// output when the statement it appears in assigns to a name containing "out"
/// (case-insensitive); every other literal is an input.
std::vector<PathLiteral> extract_path_literals(std::string_view script);

/// `path` equals a listing entry or is a directory prefix of one.
bool grounded_in(const std::string& path, const std::vector<std::string>& listing);

/// `path` equals `root` or lies below it.
bool under_root(const std::string& path, const std::string& root);

struct PairScore {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Exact coverage: every predicted pair is gold and every gold pair predicted.
  bool perfect() const { return true_positives == predicted && true_positives == gold; }
};

/// Precision/recall/F1 over distinct (SubjectID, Date) pairs; F1 is 0 when P + R is 0.
PairScore pair_f1(const std::set<integrator::SubjectKey>& predicted, const std::set<integrator::SubjectKey>& gold);

/// A manifest table after column canonicalization: the canonical columns in order, then
/// any other columns sorted by name; missing canonical columns are empty; rows sorted.
struct CanonicalTable {
  std::vector<std::string> columns;
  std::vector<csv::Row> rows;
  bool operator==(const CanonicalTable&) const = default;
};

/// Throws Error when SubjectID or Date is missing after aliasing, or a row is ragged.
CanonicalTable canonical_table(const csv::Table& table, const integrator::ColumnAliases& aliases);

/// Cell of the first row with key (subject, date); nullopt when no such row or column.
std::optional<std::string> cell(const CanonicalTable& t, const std::string& subject, const std::string& date,
                                const std::string& column);

}  // namespace neuroflow::bench
