// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace neuroflow::csv {

using Row = std::vector<std::string>;

/// RFC-4180 reader. Accepts LF or CRLF line endings; a trailing newline does not add a row.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string quote_field(std::string_view field);

/// LF line endings, trailing newline after every row.
std::string emit(const std::vector<Row>& rows);

/// Header-indexed table view over parsed rows.
struct Table {
  Row header;
  std::vector<Row> rows;

  /// Column index or -1.
  int column(std::string_view name) const;
};

Table parse_table(std::string_view text);

}  // namespace neuroflow::csv
