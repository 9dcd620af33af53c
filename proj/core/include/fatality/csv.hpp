#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fatality::csv {

using Row = std::vector<std::string>;

// Parses RFC 4180 text: fields containing comma, quote, or newline are wrapped
// in double quotes and embedded quotes are doubled. Accepts LF and CRLF line
// ends. A trailing newline does not produce an empty record.
//
// Throws DataError naming the 1-based physical record (header = record 1) on
// an unterminated quoted field or stray characters after a closing quote.
std::vector<Row> parse(std::string_view text);

// Quotes a field only when it needs it.
std::string escape(std::string_view field);

std::string format_row(const Row& row);

}  // namespace fatality::csv
